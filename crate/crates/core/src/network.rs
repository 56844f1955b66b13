//! Core domain types: species, complexes, reactions, rate laws, networks,
//! and the mass-action right-hand side.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

/// Largest stoichiometric coefficient accepted anywhere in a network.
pub const MAX_COEFFICIENT: u64 = 1 << 31;

/// Errors raised while building or evaluating a network.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("duplicate species name `{0}`")]
    DuplicateSpecies(String),
    #[error("species index {0} is out of range")]
    UnknownSpecies(usize),
    #[error("stoichiometric coefficient {0} exceeds the maximum {MAX_COEFFICIENT}")]
    CoefficientTooLarge(u64),
    #[error("reaction has identical reactant and product complexes")]
    TrivialReaction,
    #[error("rate constant must be a finite positive number, got {0}")]
    NonPositiveRate(f64),
    #[error("input and output species sets overlap")]
    InputOutputOverlap,
    #[error("a computer needs at least one input and one output species")]
    EmptyInputOrOutput,
    #[error("input/output sets must partition the species set")]
    IncompleteInputOutput,
    #[error("state has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("state component {0} is negative")]
    NegativeState(usize),
    #[error("external state has dimension {got}, expected at least {expected}")]
    ExternalDimension { expected: usize, got: usize },
    #[error("rate is time-varying; freeze the inputs or co-integrate the driving network")]
    TimeVaryingRate,
}

/// A named species with its dense index within a network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Species {
    pub id: usize,
    pub name: String,
}

/// A formal nonnegative-integer combination of species, stored sparsely.
///
/// The map only holds strictly positive coefficients and is keyed by species
/// id, so equal complexes always compare equal. The empty map is the zero
/// complex `0`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Complex {
    coefficients: BTreeMap<usize, u32>,
}

impl Complex {
    /// The empty complex.
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a complex from `(species id, coefficient)` pairs.
    ///
    /// Zero coefficients are dropped; repeated ids accumulate.
    pub fn from_pairs<I>(pairs: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = (usize, u64)>,
    {
        let mut coefficients: BTreeMap<usize, u64> = BTreeMap::new();
        for (id, coeff) in pairs {
            if coeff == 0 {
                continue;
            }
            let entry = coefficients.entry(id).or_insert(0);
            *entry = entry
                .checked_add(coeff)
                .ok_or(ModelError::CoefficientTooLarge(u64::MAX))?;
        }
        let mut out = BTreeMap::new();
        for (id, coeff) in coefficients {
            if coeff > MAX_COEFFICIENT {
                return Err(ModelError::CoefficientTooLarge(coeff));
            }
            out.insert(id, coeff as u32);
        }
        Ok(Self { coefficients: out })
    }

    /// A complex consisting of a single species with coefficient 1.
    pub fn species(id: usize) -> Self {
        let mut coefficients = BTreeMap::new();
        coefficients.insert(id, 1);
        Self { coefficients }
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Coefficient of a species (0 when absent).
    pub fn coefficient(&self, id: usize) -> u32 {
        self.coefficients.get(&id).copied().unwrap_or(0)
    }

    /// Iterates `(species id, coefficient)` in increasing id order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.coefficients.iter().map(|(&id, &c)| (id, c))
    }

    /// Largest species id mentioned, if any.
    pub fn max_species(&self) -> Option<usize> {
        self.coefficients.keys().next_back().copied()
    }

    /// Projects onto the species present in `relabel`, remapping ids.
    pub fn project(&self, relabel: &BTreeMap<usize, usize>) -> Complex {
        let coefficients = self
            .coefficients
            .iter()
            .filter_map(|(id, &c)| relabel.get(id).map(|&new| (new, c)))
            .collect();
        Complex { coefficients }
    }
}

/// A rate constant scaled by a monomial in external species concentrations.
///
/// Evaluates to `rate_constant * prod(external[slot]^power)`. Applied to a
/// reduced network, the external slots address the removed input species.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialRate {
    pub rate_constant: f64,
    /// `(external slot, power)` pairs, sorted by slot, powers >= 1.
    pub exponents: Vec<(usize, u32)>,
}

impl MonomialRate {
    pub fn value(&self, external: &[f64]) -> f64 {
        let mut v = self.rate_constant;
        for &(slot, power) in &self.exponents {
            v *= external[slot].powi(power as i32);
        }
        v
    }

    fn max_slot(&self) -> Option<usize> {
        self.exponents.iter().map(|&(slot, _)| slot).max()
    }
}

/// Kinetic rate of a reaction: a plain constant or an external monomial.
#[derive(Debug, Clone, PartialEq)]
pub enum RateLaw {
    Constant(f64),
    TimeVarying(MonomialRate),
}

impl RateLaw {
    pub fn constant(&self) -> Option<f64> {
        match self {
            RateLaw::Constant(k) => Some(*k),
            RateLaw::TimeVarying(_) => None,
        }
    }

    pub fn value(&self, external: &[f64]) -> f64 {
        match self {
            RateLaw::Constant(k) => *k,
            RateLaw::TimeVarying(m) => m.value(external),
        }
    }
}

/// A single reaction with its rate law. The net change is precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    reactant: Complex,
    product: Complex,
    rate: RateLaw,
    delta: Vec<(usize, i64)>,
}

impl Reaction {
    /// Builds a reaction, rejecting `reactant == product` and nonpositive
    /// or non-finite rate constants.
    pub fn new(reactant: Complex, product: Complex, rate: RateLaw) -> Result<Self, ModelError> {
        if reactant == product {
            return Err(ModelError::TrivialReaction);
        }
        let k = match &rate {
            RateLaw::Constant(k) => *k,
            RateLaw::TimeVarying(m) => m.rate_constant,
        };
        if !(k.is_finite() && k > 0.0) {
            return Err(ModelError::NonPositiveRate(k));
        }
        let delta = net_change(&reactant, &product);
        Ok(Self {
            reactant,
            product,
            rate,
            delta,
        })
    }

    pub fn reactant(&self) -> &Complex {
        &self.reactant
    }

    pub fn product(&self) -> &Complex {
        &self.product
    }

    pub fn rate(&self) -> &RateLaw {
        &self.rate
    }

    /// Sparse net change `product - reactant`, in increasing species order.
    pub fn delta(&self) -> &[(usize, i64)] {
        &self.delta
    }

    /// The reverse reaction with the given rate.
    pub fn reversed(&self, rate: RateLaw) -> Result<Self, ModelError> {
        Reaction::new(self.product.clone(), self.reactant.clone(), rate)
    }
}

fn net_change(reactant: &Complex, product: &Complex) -> Vec<(usize, i64)> {
    let mut delta: BTreeMap<usize, i64> = BTreeMap::new();
    for (id, c) in product.iter() {
        *delta.entry(id).or_insert(0) += c as i64;
    }
    for (id, c) in reactant.iter() {
        *delta.entry(id).or_insert(0) -= c as i64;
    }
    delta.into_iter().filter(|&(_, d)| d != 0).collect()
}

/// A chemical reaction network: an ordered species list plus reactions.
#[derive(Debug, Clone, PartialEq)]
pub struct Crn {
    species: Vec<Species>,
    reactions: Vec<Reaction>,
}

impl Crn {
    /// Builds a network, checking name uniqueness and species references.
    pub fn new<S: Into<String>>(names: Vec<S>, reactions: Vec<Reaction>) -> Result<Self, ModelError> {
        let mut seen = BTreeSet::new();
        let mut species = Vec::with_capacity(names.len());
        for (id, name) in names.into_iter().enumerate() {
            let name = name.into();
            if !seen.insert(name.clone()) {
                return Err(ModelError::DuplicateSpecies(name));
            }
            species.push(Species { id, name });
        }
        let n = species.len();
        for reaction in &reactions {
            for complex in [reaction.reactant(), reaction.product()] {
                if let Some(max) = complex.max_species() {
                    if max >= n {
                        return Err(ModelError::UnknownSpecies(max));
                    }
                }
            }
        }
        Ok(Self { species, reactions })
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn species_names(&self) -> Vec<String> {
        self.species.iter().map(|s| s.name.clone()).collect()
    }

    pub fn species_name(&self, id: usize) -> &str {
        &self.species[id].name
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.name == name)
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn all_rates_constant(&self) -> bool {
        self.reactions
            .iter()
            .all(|r| matches!(r.rate(), RateLaw::Constant(_)))
    }

    /// Number of external slots required by time-varying rates.
    pub fn external_dimension(&self) -> usize {
        self.reactions
            .iter()
            .filter_map(|r| match r.rate() {
                RateLaw::TimeVarying(m) => m.max_slot().map(|s| s + 1),
                RateLaw::Constant(_) => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// All distinct reactant and product complexes, in first-occurrence order
    /// (reactant before product, reactions in list order).
    pub fn complexes(&self) -> Vec<Complex> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for reaction in &self.reactions {
            for complex in [reaction.reactant(), reaction.product()] {
                if seen.insert(complex.clone()) {
                    out.push(complex.clone());
                }
            }
        }
        out
    }

    /// The stoichiometric matrix: `n_species` rows by `n_reactions` columns,
    /// column `j` holding the net change of reaction `j`.
    pub fn stoichiometric_matrix(&self) -> Vec<Vec<i64>> {
        let mut gamma = vec![vec![0i64; self.reactions.len()]; self.species.len()];
        for (j, reaction) in self.reactions.iter().enumerate() {
            for &(i, d) in reaction.delta() {
                gamma[i][j] = d;
            }
        }
        gamma
    }

    /// Mass-action right-hand side at `state`, with `external` supplying the
    /// concentrations referenced by time-varying rates (empty for plain
    /// mass-action systems).
    ///
    /// Reactions are summed in list order, so the result is deterministic.
    pub fn mass_action_rhs(&self, state: &[f64], external: &[f64]) -> Result<Vec<f64>, ModelError> {
        if state.len() != self.species.len() {
            return Err(ModelError::DimensionMismatch {
                expected: self.species.len(),
                got: state.len(),
            });
        }
        if let Some(i) = state.iter().position(|&s| s < 0.0) {
            return Err(ModelError::NegativeState(i));
        }
        let need = self.external_dimension();
        if external.len() < need {
            return Err(ModelError::ExternalDimension {
                expected: need,
                got: external.len(),
            });
        }
        let mut out = vec![0.0; state.len()];
        self.rhs_unchecked(state, external, &mut out);
        Ok(out)
    }

    /// Same as [`Crn::mass_action_rhs`] without the domain checks; used by the
    /// integrator, whose intermediate stages may stray marginally negative.
    pub(crate) fn rhs_unchecked(&self, state: &[f64], external: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for reaction in &self.reactions {
            let mut flux = reaction.rate().value(external);
            for (i, c) in reaction.reactant().iter() {
                flux *= state[i].powi(c as i32);
            }
            for &(i, d) in reaction.delta() {
                out[i] += flux * d as f64;
            }
        }
    }
}

/// A mass-action chemical reaction computer: a network together with a
/// partition of its species into inputs and outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct MsCrc {
    crn: Crn,
    inputs: BTreeSet<usize>,
    outputs: BTreeSet<usize>,
}

impl MsCrc {
    /// Builds a computer from the input set; outputs are the complement.
    pub fn new(crn: Crn, inputs: BTreeSet<usize>) -> Result<Self, ModelError> {
        let outputs = (0..crn.n_species()).filter(|i| !inputs.contains(i)).collect();
        Self::with_io(crn, inputs, outputs)
    }

    /// Builds a computer with explicit input and output sets, which must
    /// partition the species set and both be nonempty.
    pub fn with_io(
        crn: Crn,
        inputs: BTreeSet<usize>,
        outputs: BTreeSet<usize>,
    ) -> Result<Self, ModelError> {
        if inputs.intersection(&outputs).next().is_some() {
            return Err(ModelError::InputOutputOverlap);
        }
        if inputs.is_empty() || outputs.is_empty() {
            return Err(ModelError::EmptyInputOrOutput);
        }
        if inputs.len() + outputs.len() != crn.n_species()
            || inputs.union(&outputs).any(|&i| i >= crn.n_species())
        {
            return Err(ModelError::IncompleteInputOutput);
        }
        Ok(Self { crn, inputs, outputs })
    }

    pub fn crn(&self) -> &Crn {
        &self.crn
    }

    /// Input species ids in increasing order.
    pub fn inputs(&self) -> &BTreeSet<usize> {
        &self.inputs
    }

    /// Output species ids in increasing order.
    pub fn outputs(&self) -> &BTreeSet<usize> {
        &self.outputs
    }

    pub fn input_names(&self) -> Vec<String> {
        self.inputs.iter().map(|&i| self.crn.species_name(i).to_string()).collect()
    }

    pub fn output_names(&self) -> Vec<String> {
        self.outputs.iter().map(|&i| self.crn.species_name(i).to_string()).collect()
    }

    /// Assembles a full state vector from values listed per input and output
    /// species in increasing id order.
    pub fn assemble_state(&self, inputs: &[f64], outputs: &[f64]) -> Result<Vec<f64>, ModelError> {
        if inputs.len() != self.inputs.len() {
            return Err(ModelError::DimensionMismatch {
                expected: self.inputs.len(),
                got: inputs.len(),
            });
        }
        if outputs.len() != self.outputs.len() {
            return Err(ModelError::DimensionMismatch {
                expected: self.outputs.len(),
                got: outputs.len(),
            });
        }
        let mut state = vec![0.0; self.crn.n_species()];
        for (&id, &v) in self.inputs.iter().zip(inputs) {
            state[id] = v;
        }
        for (&id, &v) in self.outputs.iter().zip(outputs) {
            state[id] = v;
        }
        Ok(state)
    }

    /// Extracts the output components of a full state, in increasing id order.
    pub fn project_outputs(&self, state: &[f64]) -> Vec<f64> {
        self.outputs.iter().map(|&i| state[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(reactant: &[(usize, u64)], product: &[(usize, u64)], k: f64) -> Reaction {
        Reaction::new(
            Complex::from_pairs(reactant.iter().copied()).unwrap(),
            Complex::from_pairs(product.iter().copied()).unwrap(),
            RateLaw::Constant(k),
        )
        .unwrap()
    }

    /// Z1 <=> Z2 with rates (1, 2).
    fn isomerization() -> Crn {
        Crn::new(
            vec!["Z1", "Z2"],
            vec![r(&[(0, 1)], &[(1, 1)], 1.0), r(&[(1, 1)], &[(0, 1)], 2.0)],
        )
        .unwrap()
    }

    /// The six-reaction pair-sum network over X1..X4, Y1, Y2.
    fn pair_sum() -> Crn {
        let x = |i: usize| [(i, 1u64)];
        let xy = |i: usize, y: usize| [(i, 1u64), (y, 1u64)];
        Crn::new(
            vec!["X1", "X2", "X3", "X4", "Y1", "Y2"],
            vec![
                r(&x(0), &xy(0, 4), 1.0),
                r(&x(1), &xy(1, 4), 1.0),
                r(&[(4, 1)], &[], 1.0),
                r(&x(2), &xy(2, 5), 1.0),
                r(&x(3), &xy(3, 5), 1.0),
                r(&[(5, 1)], &[], 1.0),
            ],
        )
        .unwrap()
    }

    /// Y1 + Z1 -> Y1 + Z2, Y2 + Z2 -> Y2 + Z1 over (Y1, Y2, Z1, Z2).
    fn normalizer() -> Crn {
        Crn::new(
            vec!["Y1", "Y2", "Z1", "Z2"],
            vec![
                r(&[(0, 1), (2, 1)], &[(0, 1), (3, 1)], 1.0),
                r(&[(1, 1), (3, 1)], &[(1, 1), (2, 1)], 1.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn complex_canonical_equality() {
        let a = Complex::from_pairs([(3, 1), (0, 2)]).unwrap();
        let b = Complex::from_pairs([(0, 1), (0, 1), (3, 1)]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.coefficient(0), 2);
        assert_eq!(a.coefficient(1), 0);
        assert!(Complex::from_pairs([(0, 0)]).unwrap().is_empty());
    }

    #[test]
    fn complex_rejects_huge_coefficients() {
        assert!(matches!(
            Complex::from_pairs([(0, MAX_COEFFICIENT + 1)]),
            Err(ModelError::CoefficientTooLarge(_))
        ));
    }

    #[test]
    fn reaction_invariants() {
        let a = Complex::species(0);
        assert!(matches!(
            Reaction::new(a.clone(), a.clone(), RateLaw::Constant(1.0)),
            Err(ModelError::TrivialReaction)
        ));
        assert!(matches!(
            Reaction::new(a.clone(), Complex::species(1), RateLaw::Constant(0.0)),
            Err(ModelError::NonPositiveRate(_))
        ));
        assert!(matches!(
            Reaction::new(a, Complex::species(1), RateLaw::Constant(f64::NAN)),
            Err(ModelError::NonPositiveRate(_))
        ));
    }

    #[test]
    fn complexes_of_isomerization() {
        let crn = isomerization();
        let complexes = crn.complexes();
        assert_eq!(complexes.len(), 2);
        assert_eq!(complexes[0], Complex::species(0));
        assert_eq!(complexes[1], Complex::species(1));
    }

    #[test]
    fn complexes_of_single_reaction() {
        let crn = Crn::new(vec!["A", "B"], vec![r(&[(0, 1)], &[(1, 1)], 1.0)]).unwrap();
        assert_eq!(crn.complexes().len(), 2);
    }

    #[test]
    fn complexes_of_pair_sum_share_empty() {
        let crn = pair_sum();
        let complexes = crn.complexes();
        // X1, X1+Y1, X2, X2+Y1, Y1, 0, X3, X3+Y2, X4, X4+Y2, Y2: the empty
        // complex appears in two reactions but is counted once.
        assert_eq!(complexes.len(), 11);
        assert_eq!(complexes.iter().filter(|c| c.is_empty()).count(), 1);
    }

    #[test]
    fn stoichiometric_matrix_isomerization() {
        let gamma = isomerization().stoichiometric_matrix();
        assert_eq!(gamma, vec![vec![-1, 1], vec![1, -1]]);
    }

    #[test]
    fn stoichiometric_matrix_normalizer() {
        let gamma = normalizer().stoichiometric_matrix();
        assert_eq!(
            gamma,
            vec![vec![0, 0], vec![0, 0], vec![-1, 1], vec![1, -1]]
        );
    }

    #[test]
    fn rhs_at_equilibrium_is_zero() {
        let crn = isomerization();
        let rhs = crn.mass_action_rhs(&[2.0 / 3.0, 1.0 / 3.0], &[]).unwrap();
        assert!(rhs[0].abs() < 1e-15 && rhs[1].abs() < 1e-15);
    }

    #[test]
    fn rhs_vanishes_when_reactant_absent() {
        let crn = Crn::new(vec!["Y"], vec![r(&[(0, 1)], &[], 1.0)]).unwrap();
        let rhs = crn.mass_action_rhs(&[0.0], &[]).unwrap();
        assert_eq!(rhs, vec![0.0]);
    }

    #[test]
    fn rhs_of_normalizer() {
        let crn = normalizer();
        let rhs = crn.mass_action_rhs(&[1.0, 1.0, 0.25, 0.75], &[]).unwrap();
        assert!((rhs[2] - 0.5).abs() < 1e-15);
        assert!((rhs[3] + 0.5).abs() < 1e-15);
        assert_eq!(rhs[0], 0.0);
        assert_eq!(rhs[1], 0.0);
    }

    #[test]
    fn rhs_rejects_negative_state() {
        let crn = isomerization();
        assert!(matches!(
            crn.mass_action_rhs(&[-0.1, 0.5], &[]),
            Err(ModelError::NegativeState(0))
        ));
    }

    #[test]
    fn monomial_rate_evaluation() {
        let m = MonomialRate {
            rate_constant: 2.0,
            exponents: vec![(0, 1), (1, 2)],
        };
        assert!((m.value(&[3.0, 2.0]) - 24.0).abs() < 1e-15);
        assert!((RateLaw::TimeVarying(m).value(&[3.0, 2.0]) - 24.0).abs() < 1e-15);
    }

    #[test]
    fn rhs_requires_external_values_for_monomial_rates() {
        let rate = RateLaw::TimeVarying(MonomialRate {
            rate_constant: 1.0,
            exponents: vec![(1, 1)],
        });
        let reaction =
            Reaction::new(Complex::species(0), Complex::empty(), rate).unwrap();
        let crn = Crn::new(vec!["Z"], vec![reaction]).unwrap();
        assert!(matches!(
            crn.mass_action_rhs(&[1.0], &[]),
            Err(ModelError::ExternalDimension { .. })
        ));
        let rhs = crn.mass_action_rhs(&[1.0], &[0.5, 0.7]).unwrap();
        assert!((rhs[0] + 0.7).abs() < 1e-15);
    }

    #[test]
    fn crn_rejects_bad_references_and_duplicates() {
        assert!(matches!(
            Crn::new(vec!["A"], vec![r(&[(0, 1)], &[(1, 1)], 1.0)]),
            Err(ModelError::UnknownSpecies(1))
        ));
        assert!(matches!(
            Crn::new(vec!["A", "A"], Vec::new()),
            Err(ModelError::DuplicateSpecies(_))
        ));
    }

    #[test]
    fn mscrc_partition_checks() {
        let crn = normalizer();
        let computer = MsCrc::new(crn.clone(), [0, 1].into()).unwrap();
        assert_eq!(computer.outputs().iter().copied().collect::<Vec<_>>(), vec![2, 3]);
        assert_eq!(computer.output_names(), vec!["Z1", "Z2"]);

        assert!(matches!(
            MsCrc::with_io(crn.clone(), [0, 1].into(), [1, 2, 3].into()),
            Err(ModelError::InputOutputOverlap)
        ));
        assert!(matches!(
            MsCrc::with_io(crn.clone(), [0, 1, 2, 3].into(), [].into()),
            Err(ModelError::EmptyInputOrOutput)
        ));
        assert!(matches!(
            MsCrc::with_io(crn, [0].into(), [2, 3].into()),
            Err(ModelError::IncompleteInputOutput)
        ));
    }

    #[test]
    fn assemble_and_project_roundtrip() {
        let computer = MsCrc::new(normalizer(), [0, 1].into()).unwrap();
        let state = computer.assemble_state(&[0.5, 0.7], &[0.25, 0.75]).unwrap();
        assert_eq!(state, vec![0.5, 0.7, 0.25, 0.75]);
        assert_eq!(computer.project_outputs(&state), vec![0.25, 0.75]);
    }
}

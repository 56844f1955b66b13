//! Coupling of two computers into one network.
//!
//! The upstream outputs are identified with the downstream inputs by name;
//! all reactions run concurrently with their original rate constants. The
//! coupled computer takes the upstream inputs as inputs and the union of
//! both output sets as outputs.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::certify::{check_assumptions, AssumptionReport, CertifyError};
use crate::network::{Crn, ModelError, MsCrc, Reaction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComposeError {
    #[error("wiring assumptions fail: {}", .0.violations.join("; "))]
    Assumptions(AssumptionReport),
    #[error(transparent)]
    Wiring(#[from] CertifyError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Where a coupled reaction came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Upstream,
    Downstream,
}

/// The coupled system of two computers.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledSystem {
    mscrc: MsCrc,
    provenance: Vec<Provenance>,
    upstream_outputs: Vec<usize>,
    downstream_outputs: Vec<usize>,
}

impl CoupledSystem {
    pub fn mscrc(&self) -> &MsCrc {
        &self.mscrc
    }

    pub fn crn(&self) -> &Crn {
        self.mscrc.crn()
    }

    /// Per-reaction origin tags, aligned with the coupled reaction list.
    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    /// Coupled ids of the upstream output species, in increasing order.
    pub fn upstream_outputs(&self) -> &[usize] {
        &self.upstream_outputs
    }

    /// Coupled ids of the downstream output species, in increasing order.
    pub fn downstream_outputs(&self) -> &[usize] {
        &self.downstream_outputs
    }

    /// Builds the coupled initial state from upstream inputs, upstream
    /// outputs, and downstream outputs, each listed in increasing id order.
    /// The downstream inputs need no values of their own: they are the
    /// upstream outputs.
    pub fn assemble_initial(
        &self,
        upstream_in: &[f64],
        upstream_out: &[f64],
        downstream_out: &[f64],
    ) -> Result<Vec<f64>, ModelError> {
        let inputs = self.mscrc.inputs();
        if upstream_in.len() != inputs.len() {
            return Err(ModelError::DimensionMismatch {
                expected: inputs.len(),
                got: upstream_in.len(),
            });
        }
        if upstream_out.len() != self.upstream_outputs.len() {
            return Err(ModelError::DimensionMismatch {
                expected: self.upstream_outputs.len(),
                got: upstream_out.len(),
            });
        }
        if downstream_out.len() != self.downstream_outputs.len() {
            return Err(ModelError::DimensionMismatch {
                expected: self.downstream_outputs.len(),
                got: downstream_out.len(),
            });
        }
        let mut state = vec![0.0; self.crn().n_species()];
        for (&id, &v) in inputs.iter().zip(upstream_in) {
            state[id] = v;
        }
        for (&id, &v) in self.upstream_outputs.iter().zip(upstream_out) {
            state[id] = v;
        }
        for (&id, &v) in self.downstream_outputs.iter().zip(downstream_out) {
            state[id] = v;
        }
        Ok(state)
    }
}

/// Couples two computers. The wiring assumptions must pass.
pub fn couple(upstream: &MsCrc, downstream: &MsCrc) -> Result<CoupledSystem, ComposeError> {
    let assumptions = check_assumptions(upstream, downstream)?;
    if !assumptions.ok() {
        return Err(ComposeError::Assumptions(assumptions));
    }

    // Coupled species: all of the upstream network, then the downstream
    // outputs in downstream id order.
    let upstream_crn = upstream.crn();
    let downstream_crn = downstream.crn();
    let mut names = upstream_crn.species_names();
    let mut downstream_map: BTreeMap<usize, usize> = BTreeMap::new();
    for &id in downstream.inputs() {
        let name = downstream_crn.species_name(id);
        let coupled = upstream_crn
            .species_index(name)
            .expect("checked by the wiring assumptions");
        downstream_map.insert(id, coupled);
    }
    for &id in downstream.outputs() {
        downstream_map.insert(id, names.len());
        names.push(downstream_crn.species_name(id).to_string());
    }

    let mut reactions = Vec::new();
    let mut provenance = Vec::new();
    for reaction in upstream_crn.reactions() {
        reactions.push(reaction.clone());
        provenance.push(Provenance::Upstream);
    }
    for reaction in downstream_crn.reactions() {
        reactions.push(Reaction::new(
            reaction.reactant().project(&downstream_map),
            reaction.product().project(&downstream_map),
            reaction.rate().clone(),
        )?);
        provenance.push(Provenance::Downstream);
    }

    let n_upstream = upstream_crn.n_species();
    let crn = Crn::new(names, reactions)?;
    let inputs = upstream.inputs().clone();
    let upstream_outputs: Vec<usize> = upstream.outputs().iter().copied().collect();
    let downstream_outputs: Vec<usize> =
        (n_upstream..crn.n_species()).collect();
    let outputs = upstream_outputs
        .iter()
        .chain(downstream_outputs.iter())
        .copied()
        .collect();
    let mscrc = MsCrc::with_io(crn, inputs, outputs)?;
    Ok(CoupledSystem {
        mscrc,
        provenance,
        upstream_outputs,
        downstream_outputs,
    })
}

/// Renames species of a computer, for wiring gates whose port names differ.
/// Names absent from the map are kept.
pub fn rename_species(
    computer: &MsCrc,
    rename: &BTreeMap<String, String>,
) -> Result<MsCrc, ModelError> {
    let crn = computer.crn();
    let names: Vec<String> = crn
        .species_names()
        .into_iter()
        .map(|n| rename.get(&n).cloned().unwrap_or(n))
        .collect();
    let crn = Crn::new(names, crn.reactions().to_vec())?;
    MsCrc::with_io(crn, computer.inputs().clone(), computer.outputs().clone())
}

/// Couples after renaming the downstream species, a convenience for gate
/// libraries whose formal port names differ from the upstream outputs.
pub fn couple_renamed(
    upstream: &MsCrc,
    downstream: &MsCrc,
    rename: &BTreeMap<String, String>,
) -> Result<CoupledSystem, ComposeError> {
    let renamed = rename_species(downstream, rename)?;
    couple(upstream, &renamed)
}

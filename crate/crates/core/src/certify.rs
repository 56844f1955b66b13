//! Structural certification of composability.
//!
//! Two computers wired output-to-input stay composable when the reduced
//! downstream network is weakly reversible, has a single linkage class and
//! zero deficiency, and is mass-conservative. Certification is sufficient
//! only: a negative verdict never asserts non-composability.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::network::MsCrc;
use crate::reduce::reduce_mscrc;
use crate::structure::{structural_report, Conservation};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertifyError {
    /// A downstream output species shares a name with an upstream species
    /// other than the intended input identification.
    #[error("species `{0}` of the downstream outputs collides with an upstream species")]
    WiringCollision(String),
}

/// Per-assumption diagnostics for the wiring of two computers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    /// Upstream outputs equal downstream inputs, as name sets.
    pub outputs_feed_inputs: bool,
    /// Downstream outputs are disjoint from upstream inputs.
    pub downstream_outputs_fresh: bool,
    /// Every downstream reaction leaves every downstream input unchanged,
    /// which forces the input derivatives to vanish identically.
    pub catalytic_inputs: bool,
    /// Human-readable details for each failed assumption.
    pub violations: Vec<String>,
}

impl AssumptionReport {
    pub fn ok(&self) -> bool {
        self.outputs_feed_inputs && self.downstream_outputs_fresh && self.catalytic_inputs
    }
}

/// Checks the wiring assumptions between an upstream and a downstream
/// computer. Name collisions that would silently merge unrelated species are
/// errors rather than report entries.
pub fn check_assumptions(
    upstream: &MsCrc,
    downstream: &MsCrc,
) -> Result<AssumptionReport, CertifyError> {
    let upstream_outputs: BTreeSet<String> = upstream.output_names().into_iter().collect();
    let upstream_inputs: BTreeSet<String> = upstream.input_names().into_iter().collect();
    let downstream_inputs: BTreeSet<String> = downstream.input_names().into_iter().collect();
    let downstream_outputs: BTreeSet<String> = downstream.output_names().into_iter().collect();

    for name in &downstream_outputs {
        if upstream_outputs.contains(name) {
            return Err(CertifyError::WiringCollision(name.clone()));
        }
    }

    let mut violations = Vec::new();

    let outputs_feed_inputs = upstream_outputs == downstream_inputs;
    if !outputs_feed_inputs {
        violations.push(format!(
            "upstream outputs {{{}}} do not equal downstream inputs {{{}}}",
            upstream.output_names().join(", "),
            downstream.input_names().join(", ")
        ));
    }

    let overlap: Vec<&String> = downstream_outputs.intersection(&upstream_inputs).collect();
    let downstream_outputs_fresh = overlap.is_empty();
    if !downstream_outputs_fresh {
        violations.push(format!(
            "downstream outputs reuse upstream input names: {}",
            overlap.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        ));
    }

    let mut catalytic_inputs = true;
    for (j, reaction) in downstream.crn().reactions().iter().enumerate() {
        for &id in downstream.inputs() {
            let before = reaction.reactant().coefficient(id);
            let after = reaction.product().coefficient(id);
            if before != after {
                catalytic_inputs = false;
                violations.push(format!(
                    "downstream reaction {} changes input `{}` by {}",
                    j,
                    downstream.crn().species_name(id),
                    after as i64 - before as i64
                ));
            }
        }
    }

    Ok(AssumptionReport {
        outputs_feed_inputs,
        downstream_outputs_fresh,
        catalytic_inputs,
        violations,
    })
}

/// Pass/fail/undetermined outcome of one certification condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionOutcome {
    pub condition: String,
    pub outcome: Outcome,
}

/// The certification verdict.
///
/// `certified` holds only when the assumptions and all four structural
/// conditions pass. The convergence assumption on the standalone limits is
/// not structurally decidable; it is recorded here and discharged by the
/// numerical verifier.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComposabilityVerdict {
    pub assumptions_ok: bool,
    pub assumptions: AssumptionReport,
    pub certified: bool,
    pub reasons: Vec<ConditionOutcome>,
    pub conservation_vector: Conservation,
    /// Reactions excluded from the reduced network because their projection
    /// was trivial, listed for audit.
    pub dropped_reactions: Vec<String>,
    pub limits_assumption: &'static str,
}

impl ComposabilityVerdict {
    /// True when certification failed only because some condition could not
    /// be decided numerically.
    pub fn is_undetermined(&self) -> bool {
        !self.certified
            && self.assumptions_ok
            && self.reasons.iter().all(|r| r.outcome != Outcome::Fail)
            && self.reasons.iter().any(|r| r.outcome == Outcome::Undetermined)
    }
}

/// Certifies composability of `upstream` followed by `downstream` from the
/// structure of the reduced downstream network.
pub fn certify_composable(
    upstream: &MsCrc,
    downstream: &MsCrc,
) -> Result<ComposabilityVerdict, CertifyError> {
    let assumptions = check_assumptions(upstream, downstream)?;
    let reduced = reduce_mscrc(downstream);
    let report = structural_report(reduced.base());

    let decide = |pass: bool| if pass { Outcome::Pass } else { Outcome::Fail };
    let mass_conservative = match &report.conservation_vector {
        Conservation::Found(_) => Outcome::Pass,
        Conservation::Absent => Outcome::Fail,
        Conservation::Undetermined(_) => Outcome::Undetermined,
    };
    let reasons = vec![
        ConditionOutcome {
            condition: "weakly_reversible".into(),
            outcome: decide(report.weakly_reversible),
        },
        ConditionOutcome {
            condition: "single_linkage_class".into(),
            outcome: decide(report.n_linkage_classes == 1),
        },
        ConditionOutcome {
            condition: "zero_deficiency".into(),
            outcome: decide(report.deficiency == 0),
        },
        ConditionOutcome {
            condition: "mass_conservative".into(),
            outcome: mass_conservative,
        },
    ];

    let certified =
        assumptions.ok() && reasons.iter().all(|r| r.outcome == Outcome::Pass);
    Ok(ComposabilityVerdict {
        assumptions_ok: assumptions.ok(),
        assumptions,
        certified,
        reasons,
        conservation_vector: report.conservation_vector,
        dropped_reactions: reduced.dropped().iter().map(|d| d.text.clone()).collect(),
        limits_assumption: "standalone limits assumed; discharge numerically with `verify`",
    })
}

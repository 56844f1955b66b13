//! Numerical discharge of computation and composition claims.
//!
//! A computer "computes" a target when its outputs reach the target at
//! steady state. Two wired computers compose when the coupled run reaches
//! the same limits as the layer-by-layer baseline: the upstream network run
//! alone, then the reduced downstream network frozen at the upstream limit.

use serde::Serialize;
use thiserror::Error;

use crate::compose::{couple, ComposeError};
use crate::dynamics::{
    check_persistence, pseudo_helmholtz, simulate, IntegratorConfig, SimError, SimulationTrace,
    SteadyState,
};
use crate::network::{ModelError, MsCrc};
use crate::reduce::reduce_mscrc;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error("the upstream run never reached a steady state; the probe needs a settled input")]
    InputNotSettled,
}

/// Tolerances for the numerical verifier.
#[derive(Debug, Clone)]
pub struct VerifyConfig {
    /// Componentwise limit tolerance: an order above the integrator error
    /// accumulated at the default tolerances.
    pub tol: f64,
    /// Persistence threshold for the output species.
    pub persistence_threshold: f64,
    /// Fraction of the trace tail inspected by the persistence probe.
    pub tail_fraction: f64,
    pub integrator: IntegratorConfig,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            persistence_threshold: 1e-3,
            tail_fraction: 0.2,
            integrator: IntegratorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetComparison {
    pub species: String,
    pub target: f64,
    pub achieved: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeciesValue {
    pub species: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeciesFlag {
    pub species: String,
    pub persistent: bool,
}

/// The two layers of the baseline computation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerBaselines {
    pub upstream: Vec<SpeciesValue>,
    pub downstream: Vec<SpeciesValue>,
}

/// Steady-state summary of one verification run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub t_end: f64,
    pub n_steps: usize,
    pub steady: Option<SteadyState>,
}

fn summarize(name: &str, trace: &SimulationTrace) -> RunSummary {
    RunSummary {
        name: name.to_string(),
        t_end: trace.t_end(),
        n_steps: trace.n_steps,
        steady: trace.steady_state.clone(),
    }
}

/// Outcome of a verification: achieved limits against targets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub pass: bool,
    pub tolerance: f64,
    pub comparisons: Vec<TargetComparison>,
    /// Present for composition checks: the layer-by-layer limits the coupled
    /// run is held against.
    pub baselines: Option<LayerBaselines>,
    pub runs: Vec<RunSummary>,
    /// Persistence of the compared output species, flagged separately from
    /// the pass/fail decision.
    pub persistence: Vec<SpeciesFlag>,
    pub failure: Option<String>,
}

impl VerificationReport {
    pub fn max_error(&self) -> f64 {
        self.comparisons
            .iter()
            .map(|c| c.abs_error)
            .fold(0.0, f64::max)
    }
}

fn compare(names: &[String], targets: &[f64], achieved: &[f64]) -> Vec<TargetComparison> {
    names
        .iter()
        .zip(targets.iter().zip(achieved))
        .map(|(name, (&target, &value))| TargetComparison {
            species: name.clone(),
            target,
            achieved: value,
            abs_error: (value - target).abs(),
        })
        .collect()
}

/// Simulates a computer from `(x0, y0)` and compares the steady output
/// concentrations against `target` (listed per output species in increasing
/// id order).
pub fn verify_dynamic_computation(
    computer: &MsCrc,
    x0: &[f64],
    y0: &[f64],
    target: &[f64],
    cfg: &VerifyConfig,
) -> Result<VerificationReport, VerifyError> {
    let output_names = computer.output_names();
    if target.len() != output_names.len() {
        return Err(ModelError::DimensionMismatch {
            expected: output_names.len(),
            got: target.len(),
        }
        .into());
    }
    let s0 = computer.assemble_state(x0, y0)?;
    let trace = simulate(computer.crn(), &s0, &cfg.integrator)?;
    let persistence_flags = check_persistence(&trace, cfg.persistence_threshold, cfg.tail_fraction);
    let persistence = computer
        .outputs()
        .iter()
        .map(|&id| SpeciesFlag {
            species: computer.crn().species_name(id).to_string(),
            persistent: persistence_flags[id],
        })
        .collect();
    let runs = vec![summarize("computation", &trace)];

    match &trace.steady_state {
        Some(steady) => {
            let achieved = computer.project_outputs(&steady.estimate);
            let comparisons = compare(&output_names, target, &achieved);
            let pass = comparisons.iter().all(|c| c.abs_error <= cfg.tol);
            Ok(VerificationReport {
                pass,
                tolerance: cfg.tol,
                comparisons,
                baselines: None,
                runs,
                persistence,
                failure: None,
            })
        }
        None => Ok(VerificationReport {
            pass: false,
            tolerance: cfg.tol,
            comparisons: Vec::new(),
            baselines: None,
            runs,
            persistence,
            failure: Some(format!(
                "steady state not reached within t_end = {}",
                cfg.integrator.t_end
            )),
        }),
    }
}

/// Three-run composition check.
///
/// 1. the upstream computer alone from `(x0, y0_up)` gives the first-layer
///    limit;
/// 2. the reduced downstream network frozen at that limit, from `y0_down`,
///    gives the second-layer limit;
/// 3. the coupled system from `(x0, y0_up, y0_down)` must reach both limits
///    within tolerance.
pub fn verify_composition_numeric(
    upstream: &MsCrc,
    downstream: &MsCrc,
    x0: &[f64],
    y0_up: &[f64],
    y0_down: &[f64],
    cfg: &VerifyConfig,
) -> Result<VerificationReport, VerifyError> {
    let coupled = couple(upstream, downstream)?;
    let mut runs = Vec::new();

    let fail = |runs: Vec<RunSummary>, which: &str| VerificationReport {
        pass: false,
        tolerance: cfg.tol,
        comparisons: Vec::new(),
        baselines: None,
        runs,
        persistence: Vec::new(),
        failure: Some(format!("{which} run did not reach a steady state")),
    };

    // Layer one: the upstream computer alone.
    let s0_up = upstream.assemble_state(x0, y0_up)?;
    let trace_up = simulate(upstream.crn(), &s0_up, &cfg.integrator)?;
    runs.push(summarize("upstream", &trace_up));
    let Some(steady_up) = trace_up.steady_state.clone() else {
        return Ok(fail(runs, "upstream"));
    };
    let upstream_limit = upstream.project_outputs(&steady_up.estimate);
    let upstream_names = upstream.output_names();

    // Layer two: the reduced downstream network with inputs frozen at the
    // first-layer limit (matched by name).
    let reduced = reduce_mscrc(downstream);
    let frozen_inputs: Vec<f64> = reduced
        .external_names()
        .iter()
        .map(|name| {
            let pos = upstream_names
                .iter()
                .position(|n| n == name)
                .expect("wiring assumptions identify these name sets");
            upstream_limit[pos]
        })
        .collect();
    let frozen = reduced.freeze_inputs(&frozen_inputs)?;
    let trace_down = simulate(&frozen, y0_down, &cfg.integrator)?;
    runs.push(summarize("frozen downstream", &trace_down));
    let Some(steady_down) = trace_down.steady_state.clone() else {
        return Ok(fail(runs, "frozen downstream"));
    };
    let downstream_limit = steady_down.estimate.clone();
    let downstream_names = downstream.output_names();

    // Layer three: the coupled system.
    let s0 = coupled.assemble_initial(x0, y0_up, y0_down)?;
    let trace = simulate(coupled.crn(), &s0, &cfg.integrator)?;
    runs.push(summarize("coupled", &trace));
    let Some(steady) = trace.steady_state.clone() else {
        return Ok(fail(runs, "coupled"));
    };

    let coupled_up: Vec<f64> = coupled
        .upstream_outputs()
        .iter()
        .map(|&id| steady.estimate[id])
        .collect();
    let coupled_down: Vec<f64> = coupled
        .downstream_outputs()
        .iter()
        .map(|&id| steady.estimate[id])
        .collect();

    let mut comparisons = compare(&upstream_names, &upstream_limit, &coupled_up);
    comparisons.extend(compare(&downstream_names, &downstream_limit, &coupled_down));
    let pass = comparisons.iter().all(|c| c.abs_error <= cfg.tol);

    let persistence_flags = check_persistence(&trace, cfg.persistence_threshold, cfg.tail_fraction);
    let persistence = coupled
        .upstream_outputs()
        .iter()
        .chain(coupled.downstream_outputs())
        .map(|&id| SpeciesFlag {
            species: coupled.crn().species_name(id).to_string(),
            persistent: persistence_flags[id],
        })
        .collect();

    let baselines = LayerBaselines {
        upstream: upstream_names
            .iter()
            .zip(&upstream_limit)
            .map(|(n, &v)| SpeciesValue {
                species: n.clone(),
                value: v,
            })
            .collect(),
        downstream: downstream_names
            .iter()
            .zip(&downstream_limit)
            .map(|(n, &v)| SpeciesValue {
                species: n.clone(),
                value: v,
            })
            .collect(),
    };

    Ok(VerificationReport {
        pass,
        tolerance: cfg.tol,
        comparisons,
        baselines: Some(baselines),
        runs,
        persistence,
        failure: None,
    })
}

/// Which of the two limiting behaviors the probe observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DescentOutcome {
    ConvergedToEquilibrium,
    ApproachedBoundary,
    Inconclusive,
}

/// Free-energy descent probe along a coupled run.
#[derive(Debug, Clone, Serialize)]
pub struct DescentProbe {
    /// When the upstream outputs settled (standalone run).
    pub settled_at: f64,
    /// Whether the free energy is nonincreasing (slack 1e-10) over the
    /// samples after `settled_at` that stay outside the `eta`-ball.
    pub eventual_monotone: bool,
    /// Earliest time from which the filtered descent holds.
    pub monotone_from: Option<f64>,
    pub outcome: DescentOutcome,
    pub persistent: Vec<bool>,
    pub final_distance: f64,
    /// `(t, V, distance)` samples of the probe (positive states only).
    #[serde(skip)]
    pub samples: Vec<(f64, f64, f64)>,
}

/// Samples the pseudo-Helmholtz free energy of the downstream outputs along
/// the coupled run, relative to the frozen-input equilibrium `equilibrium`
/// (listed per downstream output species in increasing id order).
pub fn lyapunov_descent_probe(
    upstream: &MsCrc,
    downstream: &MsCrc,
    x0: &[f64],
    y0_up: &[f64],
    y0_down: &[f64],
    equilibrium: &[f64],
    eta: f64,
    cfg: &VerifyConfig,
) -> Result<DescentProbe, VerifyError> {
    let coupled = couple(upstream, downstream)?;

    let s0_up = upstream.assemble_state(x0, y0_up)?;
    let trace_up = simulate(upstream.crn(), &s0_up, &cfg.integrator)?;
    let settled_at = trace_up
        .steady_state
        .as_ref()
        .ok_or(VerifyError::InputNotSettled)?
        .t_reached;

    let s0 = coupled.assemble_initial(x0, y0_up, y0_down)?;
    let trace = simulate(coupled.crn(), &s0, &cfg.integrator)?;

    let ids = coupled.downstream_outputs();
    let mut samples = Vec::new();
    for (&t, state) in trace.times.iter().zip(&trace.states) {
        let y: Vec<f64> = ids.iter().map(|&id| state[id]).collect();
        if y.iter().all(|&v| v > 0.0) {
            let v = pseudo_helmholtz(&y, equilibrium)?;
            let dist = y
                .iter()
                .zip(equilibrium)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            samples.push((t, v, dist));
        }
    }

    // Filter to the descent regime: input settled, state outside the ball.
    let filtered: Vec<(f64, f64)> = samples
        .iter()
        .filter(|&&(t, _, dist)| t >= settled_at && dist >= eta)
        .map(|&(t, v, _)| (t, v))
        .collect();
    let mut monotone_from = filtered.first().map(|&(t, _)| t);
    for pair in filtered.windows(2) {
        if pair[1].1 > pair[0].1 + 1e-10 {
            monotone_from = Some(pair[1].0);
        }
    }
    let eventual_monotone = match monotone_from {
        // Monotone from somewhere strictly inside the filtered range, or the
        // range is empty (nothing to descend through).
        Some(from) => filtered.last().map(|&(t, _)| from < t).unwrap_or(true),
        None => true,
    };

    let persistence_flags = check_persistence(&trace, cfg.persistence_threshold, cfg.tail_fraction);
    let persistent: Vec<bool> = ids.iter().map(|&id| persistence_flags[id]).collect();
    let final_state = trace.final_state();
    let final_distance = ids
        .iter()
        .zip(equilibrium)
        .map(|(&id, &e)| (final_state[id] - e).abs())
        .fold(0.0, f64::max);

    let outcome = if persistent.iter().all(|&p| p) && final_distance < eta {
        DescentOutcome::ConvergedToEquilibrium
    } else if persistent.iter().any(|&p| !p) {
        DescentOutcome::ApproachedBoundary
    } else {
        DescentOutcome::Inconclusive
    };

    Ok(DescentProbe {
        settled_at,
        eventual_monotone,
        monotone_from,
        outcome,
        persistent,
        final_distance,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_network, ParseOptions};

    fn computer(text: &str) -> MsCrc {
        parse_network(text, &ParseOptions::default())
            .unwrap()
            .as_computer()
            .unwrap()
            .clone()
    }

    fn pair_sum() -> MsCrc {
        computer(
            "species X1 X2 X3 X4 Y1 Y2\ninputs X1 X2 X3 X4\n\
             X1 -> X1 + Y1 ; k=1\nX2 -> X2 + Y1 ; k=1\nY1 -> 0 ; k=1\n\
             X3 -> X3 + Y2 ; k=1\nX4 -> X4 + Y2 ; k=1\nY2 -> 0 ; k=1\n",
        )
    }

    fn normalizer() -> MsCrc {
        computer(
            "species Y1 Y2 Z1 Z2\ninputs Y1 Y2\n\
             Y1 + Z1 -> Y1 + Z2 ; k=1\nY2 + Z2 -> Y2 + Z1 ; k=1\n",
        )
    }

    #[test]
    fn pair_sum_computes_the_sums() {
        let report = verify_dynamic_computation(
            &pair_sum(),
            &[0.2, 0.3, 0.6, 0.1],
            &[0.0, 0.0],
            &[0.5, 0.7],
            &VerifyConfig::default(),
        )
        .unwrap();
        assert!(report.pass, "{report:?}");
        assert!(report.max_error() <= 1e-4);
    }

    #[test]
    fn symmetric_normalizer_input_fixes_the_state() {
        let report = verify_dynamic_computation(
            &normalizer(),
            &[1.0, 1.0],
            &[0.5, 0.5],
            &[0.5, 0.5],
            &VerifyConfig::default(),
        )
        .unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn normalizer_balance_determines_the_limit() {
        // With inputs (0.5, 0.7) the exchange balance forces the limit
        // (7/12, 5/12) on the invariant z1 + z2 = 1.
        let report = verify_dynamic_computation(
            &normalizer(),
            &[0.5, 0.7],
            &[0.5, 0.5],
            &[7.0 / 12.0, 5.0 / 12.0],
            &VerifyConfig::default(),
        )
        .unwrap();
        assert!(report.pass, "{report:?}");
        assert!(report.persistence.iter().all(|f| f.persistent));
    }

    #[test]
    fn unreachable_target_fails_with_error_budget() {
        let report = verify_dynamic_computation(
            &normalizer(),
            &[0.5, 0.7],
            &[0.5, 0.5],
            &[0.9, 0.1],
            &VerifyConfig::default(),
        )
        .unwrap();
        assert!(!report.pass);
        assert!(report.failure.is_none());
        assert!(report.max_error() > 0.1);
    }

    #[test]
    fn oscillator_reports_steady_state_not_reached() {
        let lotka = computer(
            "species X Y\ninputs X\nX -> 2 X ; k=2\nX + Y -> 2 Y ; k=3\nY -> 0 ; k=5\n",
        );
        let cfg = VerifyConfig {
            integrator: IntegratorConfig {
                t_end: 30.0,
                ..IntegratorConfig::default()
            },
            ..VerifyConfig::default()
        };
        let report =
            verify_dynamic_computation(&lotka, &[1.0], &[2.0], &[1.0], &cfg).unwrap();
        assert!(!report.pass);
        assert!(report.failure.unwrap().contains("not reached"));
    }

    #[test]
    fn composition_matches_layer_by_layer_limits() {
        let report = verify_composition_numeric(
            &pair_sum(),
            &normalizer(),
            &[0.2, 0.3, 0.6, 0.1],
            &[0.0, 0.0],
            &[0.5, 0.5],
            &VerifyConfig::default(),
        )
        .unwrap();
        assert!(report.pass, "{report:?}");
        let baselines = report.baselines.as_ref().unwrap();
        assert!((baselines.upstream[0].value - 0.5).abs() < 1e-6);
        assert!((baselines.upstream[1].value - 0.7).abs() < 1e-6);
        assert!((baselines.downstream[0].value - 7.0 / 12.0).abs() < 1e-6);
        assert!((baselines.downstream[1].value - 5.0 / 12.0).abs() < 1e-6);
        assert_eq!(report.runs.len(), 3);
    }

    #[test]
    fn reactionless_downstream_keeps_its_initial_state() {
        let inert = computer("species Y1 Y2 Z1 Z2\ninputs Y1 Y2\noutputs Z1 Z2\n");
        let report = verify_composition_numeric(
            &pair_sum(),
            &inert,
            &[0.2, 0.3, 0.6, 0.1],
            &[0.0, 0.0],
            &[0.25, 0.75],
            &VerifyConfig::default(),
        )
        .unwrap();
        assert!(report.pass, "{report:?}");
        let down = &report.baselines.unwrap().downstream;
        assert!((down[0].value - 0.25).abs() < 1e-12);
        assert!((down[1].value - 0.75).abs() < 1e-12);
    }

    #[test]
    fn limits_scale_with_the_conserved_total() {
        // Doubling z1(0) + z2(0) doubles the downstream limits.
        let report = verify_composition_numeric(
            &pair_sum(),
            &normalizer(),
            &[0.2, 0.3, 0.6, 0.1],
            &[0.0, 0.0],
            &[1.0, 1.0],
            &VerifyConfig::default(),
        )
        .unwrap();
        assert!(report.pass, "{report:?}");
        let down = &report.baselines.unwrap().downstream;
        assert!((down[0].value - 2.0 * 7.0 / 12.0).abs() < 1e-6);
        assert!((down[1].value - 2.0 * 5.0 / 12.0).abs() < 1e-6);
    }

    #[test]
    fn baseline_is_independent_of_the_start_within_a_class() {
        // Two downstream starts with the same conserved total give the same
        // second-layer baseline.
        let run = |y0_down: [f64; 2]| {
            verify_composition_numeric(
                &pair_sum(),
                &normalizer(),
                &[0.2, 0.3, 0.6, 0.1],
                &[0.0, 0.0],
                &y0_down,
                &VerifyConfig::default(),
            )
            .unwrap()
        };
        let a = run([0.5, 0.5]);
        let b = run([0.9, 0.1]);
        let av = &a.baselines.unwrap().downstream;
        let bv = &b.baselines.unwrap().downstream;
        for (x, y) in av.iter().zip(bv) {
            assert!((x.value - y.value).abs() < 1e-6);
        }
    }

    #[test]
    fn limits_are_invariant_under_input_scaling() {
        // The composite map is scale-invariant in x0.
        let run = |scale: f64| {
            let x0: Vec<f64> = [0.2, 0.3, 0.6, 0.1].iter().map(|v| v * scale).collect();
            verify_composition_numeric(
                &pair_sum(),
                &normalizer(),
                &x0,
                &[0.0, 0.0],
                &[0.5, 0.5],
                &VerifyConfig::default(),
            )
            .unwrap()
        };
        let base = run(1.0);
        let scaled = run(3.0);
        let bd = base.baselines.unwrap().downstream;
        let sd = scaled.baselines.unwrap().downstream;
        for (x, y) in bd.iter().zip(&sd) {
            assert!((x.value - y.value).abs() < 1e-6);
        }
    }

    #[test]
    fn descent_probe_on_the_composite_run() {
        let probe = lyapunov_descent_probe(
            &pair_sum(),
            &normalizer(),
            &[0.2, 0.3, 0.6, 0.1],
            &[0.0, 0.0],
            &[0.5, 0.5],
            &[7.0 / 12.0, 5.0 / 12.0],
            1e-3,
            &VerifyConfig::default(),
        )
        .unwrap();
        assert!(probe.eventual_monotone, "{probe:?}");
        assert_eq!(probe.outcome, DescentOutcome::ConvergedToEquilibrium);
        assert!(probe.persistent.iter().all(|&p| p));
        assert!(probe.final_distance < 1e-6);
    }

    #[test]
    fn descent_probe_recovers_from_a_boundary_start() {
        // z1(0) = 0: the state enters the positive orthant immediately and
        // still converges.
        let probe = lyapunov_descent_probe(
            &pair_sum(),
            &normalizer(),
            &[0.2, 0.3, 0.6, 0.1],
            &[0.0, 0.0],
            &[0.0, 1.0],
            &[7.0 / 12.0, 5.0 / 12.0],
            1e-3,
            &VerifyConfig::default(),
        )
        .unwrap();
        assert_eq!(probe.outcome, DescentOutcome::ConvergedToEquilibrium);
        assert!(probe.persistent.iter().all(|&p| p));
    }
}

//! Fixtures shared by the benchmarks.

use tvblf_core::sim::SimConfig;
use tvblf_core::ExperimentConfig;

/// The bundled rig experiment, shortened to `horizon` seconds.
pub fn rig_sim(horizon: f64) -> SimConfig {
    let mut cfg = ExperimentConfig::helicopter_quanser();
    cfg.sim.horizon = horizon;
    cfg.sim_config().expect("bundled config resolves")
}

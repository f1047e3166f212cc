//! Pulsed-readout simulator and the gate-modulation sideband model.

pub mod envelope;
pub mod map;
pub mod pulse;
pub mod sidebands;

pub use envelope::{
    max_stable_step, resonator_envelope, steady_field, DriveWindow, EnvelopeSetup, SampledTrajectory, TimeTrace,
    Trajectory,
};
pub use map::{simulate_map, MapOptions, SimulationMap, DEFAULT_BIASTEE_CUTOFF};
pub use pulse::{biastee_highpass, gate_relaxation, GateResponseModel, MonotoneTable, PulseSequence};
pub use sidebands::{
    filtered_depth, log_grid, minus_3db_point, sideband_response, sideband_sweep, SidebandModel, SidebandOptions,
    SidebandSpectrum, SidebandSweep, HALF_POWER_DB,
};

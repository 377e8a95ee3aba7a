//! Link abstraction: frame simulation, MMSE reception and MCS selection.

pub mod frame;
pub mod mcs;
pub mod receiver;

pub use frame::{
    aggregate_all, capture_csi, fetch_frame_channels, simulate_frame, FramePlan, LinkOptions,
    StreamResult, SubframeResult, ThroughputReport,
};
pub use mcs::{calibrate_mcs_thresholds, select_mcs, McsEntry, McsTable, Modulation};
pub use receiver::{effective_sinr_db, mmse_combine, post_sinr, Combiner};

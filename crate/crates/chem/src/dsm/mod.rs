//! Exact descriptor calculation and the calibrated-knowledge text built from
//! it.

mod crippen;
mod descriptors;
mod report;

pub use crippen::{crippen_contributions, crippen_logp, AtomContribution};
pub use descriptors::{
    hba_count, hbd_count, heavy_atom_count, molecular_weight, ring_count, rotatable_bonds,
};
pub use report::{
    compute_report, format_calibrated, CalibratedKnowledge, DescriptorReport, DsmError, MetricId,
    MetricValue,
};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{crippen_logp, descriptors};
use crate::error::ChemError;
use crate::molecule::Molecule;

/// The closed set of metrics the calculator can report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricId {
    MolecularWeight,
    Logp,
    Hbd,
    Hba,
    RotatableBonds,
    RingCount,
    HeavyAtomCount,
}

impl MetricId {
    pub const ALL: [MetricId; 7] = [
        MetricId::MolecularWeight,
        MetricId::Logp,
        MetricId::Hbd,
        MetricId::Hba,
        MetricId::RotatableBonds,
        MetricId::RingCount,
        MetricId::HeavyAtomCount,
    ];

    /// Human-readable name used in calibrated-knowledge lines.
    pub fn display_name(self) -> &'static str {
        match self {
            MetricId::MolecularWeight => "Molecular weight",
            MetricId::Logp => "LogP",
            MetricId::Hbd => "Hydrogen bond donors",
            MetricId::Hba => "Hydrogen bond acceptors",
            MetricId::RotatableBonds => "Rotatable bonds",
            MetricId::RingCount => "Ring count",
            MetricId::HeavyAtomCount => "Heavy atom count",
        }
    }

    /// Lowercase names a property may go by in free text.
    pub fn aliases(self) -> &'static [&'static str] {
        match self {
            MetricId::MolecularWeight => &[
                "molecular weight",
                "molecular mass",
                "molar mass",
                "molecular size",
                "mw",
            ],
            MetricId::Logp => &[
                "logp",
                "log p",
                "clogp",
                "lipophilicity",
                "lipophilicity (logp)",
                "hydrophobicity",
                "partition coefficient",
                "octanol-water partition coefficient",
            ],
            MetricId::Hbd => &[
                "hydrogen bond donors",
                "hydrogen bond donor",
                "h-bond donors",
                "h-bond donor",
                "hbd",
                "donors",
                "donor",
            ],
            MetricId::Hba => &[
                "hydrogen bond acceptors",
                "hydrogen bond acceptor",
                "h-bond acceptors",
                "h-bond acceptor",
                "hba",
                "acceptors",
                "acceptor",
            ],
            MetricId::RotatableBonds => &[
                "rotatable bonds",
                "rotatable bond count",
                "number of rotatable bonds",
                "molecular flexibility",
                "flexibility",
            ],
            MetricId::RingCount => &[
                "ring count",
                "number of rings",
                "rings",
                "ring systems",
            ],
            MetricId::HeavyAtomCount => &[
                "heavy atom count",
                "number of heavy atoms",
                "heavy atoms",
            ],
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            MetricId::MolecularWeight => "g/mol",
            _ => "",
        }
    }

    /// Continuous metrics print with three decimals, counts as integers.
    pub fn is_count(self) -> bool {
        !matches!(self, MetricId::MolecularWeight | MetricId::Logp)
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub metric: MetricId,
    pub value: f64,
    pub unit: String,
}

impl MetricValue {
    pub fn formatted(&self) -> String {
        if self.metric.is_count() {
            format!("{}", self.value as i64)
        } else {
            format!("{:.3}", self.value)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorReport {
    pub smiles: String,
    pub values: Vec<MetricValue>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DsmError {
    #[error("no metrics requested")]
    EmptyRequest,
    #[error("metric {0:?} requested twice")]
    DuplicateMetric(MetricId),
    #[error("computing {metric:?} failed: {source}")]
    Metric { metric: MetricId, source: ChemError },
    #[error("{metric:?} evaluated to a non-finite value")]
    NonFinite { metric: MetricId },
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// Compute the requested metrics in request order.
pub fn compute_report(
    molecule: &Molecule,
    requested: &[MetricId],
) -> Result<DescriptorReport, DsmError> {
    if requested.is_empty() {
        return Err(DsmError::EmptyRequest);
    }
    let mut values = Vec::with_capacity(requested.len());
    for (k, &metric) in requested.iter().enumerate() {
        if requested[..k].contains(&metric) {
            return Err(DsmError::DuplicateMetric(metric));
        }
        let value = match metric {
            MetricId::MolecularWeight => round3(
                descriptors::molecular_weight(molecule)
                    .map_err(|source| DsmError::Metric { metric, source })?,
            ),
            MetricId::Logp => round3(crippen_logp(molecule)),
            MetricId::Hbd => descriptors::hbd_count(molecule) as f64,
            MetricId::Hba => descriptors::hba_count(molecule) as f64,
            MetricId::RotatableBonds => descriptors::rotatable_bonds(molecule) as f64,
            MetricId::RingCount => descriptors::ring_count(molecule) as f64,
            MetricId::HeavyAtomCount => descriptors::heavy_atom_count(molecule) as f64,
        };
        if !value.is_finite() {
            return Err(DsmError::NonFinite { metric });
        }
        values.push(MetricValue { metric, value, unit: metric.unit().to_string() });
    }
    Ok(DescriptorReport { smiles: molecule.smiles_source().to_string(), values })
}

/// Calibrated knowledge: one `<MetricName> of <SMILES>: <value>` line per
/// reported metric.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CalibratedKnowledge {
    pub lines: Vec<String>,
}

impl CalibratedKnowledge {
    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// Newline-terminated lines.
    pub fn to_text(&self) -> String {
        self.lines.iter().map(|l| format!("{l}\n")).collect()
    }
}

pub fn format_calibrated(report: &DescriptorReport) -> CalibratedKnowledge {
    CalibratedKnowledge {
        lines: report
            .values
            .iter()
            .map(|v| format!("{} of {}: {}", v.metric.display_name(), report.smiles, v.formatted()))
            .collect(),
    }
}

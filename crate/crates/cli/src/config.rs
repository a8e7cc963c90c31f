//! JSON run configuration. Unknown keys are rejected everywhere; every
//! diagnostic names the offending field path.

use std::path::Path;

use nts_core::simulate::{DecoderKind, Sampler, Scheme};
use nts_core::{Channel, Distribution};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub channel: ChannelSpec,
    pub q0: Vec<f64>,
    #[serde(default)]
    pub params: Params,
}

/// Either `rows`, or the sizes plus a row-major `matrix`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_alphabet_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_alphabet_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    pub start_block: usize,
    pub channel: ChannelSpec,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_grid: Option<RateGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoder: Option<DecoderKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<Sampler>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub codebook_cap: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<ScheduleEntry>>,
}

/// Reads and deserializes a JSON file; a missing or unreadable file is an I/O
/// failure, anything else a configuration failure.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        CliError::Config(format!("{}: field `{at}`: {}", path.display(), e.inner()))
    })
}

impl ChannelSpec {
    pub fn resolve(&self, field: &str) -> Result<Channel, CliError> {
        let rows = match (&self.rows, &self.matrix) {
            (Some(rows), None) => {
                if let Some(nx) = self.input_alphabet_size {
                    if nx != rows.len() {
                        return Err(CliError::Config(format!(
                            "field `{field}.input_alphabet_size`: {nx} does not match {} rows",
                            rows.len()
                        )));
                    }
                }
                if let Some(ny) = self.output_alphabet_size {
                    if rows.iter().any(|r| r.len() != ny) {
                        return Err(CliError::Config(format!(
                            "field `{field}.output_alphabet_size`: rows are not of length {ny}"
                        )));
                    }
                }
                rows.clone()
            }
            (None, Some(matrix)) => {
                let (Some(nx), Some(ny)) = (self.input_alphabet_size, self.output_alphabet_size)
                else {
                    return Err(CliError::Config(format!(
                        "field `{field}.matrix` needs `input_alphabet_size` and `output_alphabet_size`"
                    )));
                };
                if nx == 0 || ny == 0 || matrix.len() != nx * ny {
                    return Err(CliError::Config(format!(
                        "field `{field}.matrix`: {} entries for a {nx}x{ny} channel",
                        matrix.len()
                    )));
                }
                matrix.chunks(ny).map(|c| c.to_vec()).collect()
            }
            (None, None) => {
                return Err(CliError::Config(format!("field `{field}.rows` is missing")));
            }
            (Some(_), Some(_)) => {
                return Err(CliError::Config(format!(
                    "field `{field}`: give either `rows` or `matrix`, not both"
                )));
            }
        };
        Channel::new(rows).map_err(|e| CliError::Config(format!("field `{field}`: {e}")))
    }

    /// Canonical `rows` form for manifests.
    pub fn normalized(&self, channel: &Channel) -> ChannelSpec {
        ChannelSpec {
            name: self.name.clone(),
            rows: Some(channel.rows()),
            input_alphabet_size: None,
            output_alphabet_size: None,
            matrix: None,
        }
    }
}

/// Validated objects shared by every command.
pub struct Resolved {
    pub channel: Channel,
    pub q0: Distribution,
}

impl ConfigFile {
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let channel = self.channel.resolve("channel")?;
        let q0 = Distribution::new(self.q0.clone())
            .map_err(|e| CliError::Config(format!("field `q0`: {e}")))?;
        if q0.len() != channel.nx() {
            return Err(CliError::Config(format!(
                "field `q0`: {} entries for {} channel inputs",
                q0.len(),
                channel.nx()
            )));
        }
        Ok(Resolved { channel, q0 })
    }
}

/// Value of a required parameter, or a configuration error naming it.
pub fn require<T: Copy>(value: Option<T>, name: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Config(format!("field `params.{name}` is required")))
}

impl RateGrid {
    /// Grid points `start + k·step` up to `stop` (inclusive within 1e-9 steps).
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        let ok = self.start.is_finite()
            && self.stop.is_finite()
            && self.step.is_finite()
            && self.step > 0.0
            && self.start >= 0.0
            && self.stop >= self.start;
        if !ok {
            return Err(CliError::Config(
                "field `params.rate_grid`: need 0 <= start <= stop and step > 0".into(),
            ));
        }
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        if count > 1_000_000 {
            return Err(CliError::Config(format!(
                "field `params.rate_grid`: {count} points exceed the 1e6 limit"
            )));
        }
        Ok((0..count).map(|k| self.start + k as f64 * self.step).collect())
    }
}

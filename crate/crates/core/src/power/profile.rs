use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::NetworkData;

const MIN_SCALE: f64 = 0.1;

/// Per-period load multipliers: `scale[t][j]` applies to load `j` in period `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadProfile {
    pub periods: usize,
    pub resolution_minutes: f64,
    pub seed: u64,
    pub amplitude: f64,
    pub noise: f64,
    pub scale: Vec<Vec<f64>>,
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed profile: {0}")]
    Malformed(String),
}

/// Sinusoidal daily load shape with uniform noise, drawn from ChaCha8 seeded
/// with `seed`. Entries are clipped below at 0.1.
pub fn generate_load_profile(network: &NetworkData, periods: usize, resolution_minutes: f64, seed: u64, amplitude: f64, noise: f64) -> LoadProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let loads = network.loads.len();
    let scale = (0..periods)
        .map(|t| {
            let base = 1.0 + amplitude * (2.0 * PI * t as f64 * resolution_minutes / 1440.0).sin();
            (0..loads)
                .map(|_| {
                    let u: f64 = if noise > 0.0 { rng.gen_range(-1.0..1.0) } else { 0.0 };
                    (base + noise * u).max(MIN_SCALE)
                })
                .collect()
        })
        .collect();
    LoadProfile { periods, resolution_minutes, seed, amplitude, noise, scale }
}

impl LoadProfile {
    /// Same multiplier for every load in every period.
    pub fn flat(network: &NetworkData, periods: usize, resolution_minutes: f64) -> Self {
        generate_load_profile(network, periods, resolution_minutes, 0, 0.0, 0.0)
    }

    /// One row per period: `period,minute,load_0,…`. Generation parameters
    /// are written as a leading comment line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), ProfileError> {
        writeln!(
            out,
            "# resolution_minutes={} seed={} amplitude={} noise={}",
            self.resolution_minutes, self.seed, self.amplitude, self.noise
        )
        .map_err(csv::Error::from)?;
        let mut w = csv::Writer::from_writer(out);
        let loads = self.scale.first().map_or(0, Vec::len);
        let mut header = vec!["period".to_string(), "minute".to_string()];
        header.extend((0..loads).map(|j| format!("load_{j}")));
        w.write_record(&header)?;
        for (t, row) in self.scale.iter().enumerate() {
            let mut rec = vec![t.to_string(), (t as f64 * self.resolution_minutes).to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, ProfileError> {
        let mut text = String::new();
        let mut input = input;
        input.read_to_string(&mut text).map_err(csv::Error::from)?;
        let (meta, body) = match text.strip_prefix('#') {
            Some(rest) => rest.split_once('\n').unwrap_or((rest, "")),
            None => ("", text.as_str()),
        };
        let field = |key: &str| -> Option<&str> { meta.split_whitespace().find_map(|kv| kv.strip_prefix(key)?.strip_prefix('=')) };
        let num = |key: &str| -> Result<f64, ProfileError> {
            field(key).unwrap_or("0").parse().map_err(|_| ProfileError::Malformed(format!("bad {key}")))
        };
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let mut scale = Vec::new();
        let mut minutes = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(ProfileError::Malformed("row has fewer than two columns".into()));
            }
            let vals = rec.iter().map(str::parse::<f64>).collect::<Result<Vec<_>, _>>().map_err(|e| ProfileError::Malformed(e.to_string()))?;
            if vals[0] as usize != scale.len() {
                return Err(ProfileError::Malformed(format!("period {} out of order", vals[0])));
            }
            if vals[2..].iter().any(|&v| !(v > 0.0)) {
                return Err(ProfileError::Malformed(format!("non-positive multiplier in period {}", vals[0])));
            }
            minutes.push(vals[1]);
            scale.push(vals[2..].to_vec());
        }
        let resolution_minutes = match field("resolution_minutes") {
            Some(_) => num("resolution_minutes")?,
            None => minutes.get(1).copied().unwrap_or(60.0),
        };
        Ok(LoadProfile {
            periods: scale.len(),
            resolution_minutes,
            seed: field("seed").and_then(|s| s.parse().ok()).unwrap_or(0),
            amplitude: num("amplitude")?,
            noise: num("noise")?,
            scale,
        })
    }
}

//! Periodic excitation: three unit pulse trains with binary polarity
//! sequences, overlap-added at a fixed allocation interval.

use serde::{Deserialize, Serialize};

use crate::capricep::UnitCapricep;
use crate::error::{Error, Result};

pub const SLOTS_PER_PERIOD: usize = 4;
pub const NUM_SEQUENCES: usize = 3;

pub type PolarityMatrix = [[i8; SLOTS_PER_PERIOD]; NUM_SEQUENCES];

/// Weights combining the three per-sequence responses into the extended
/// (four-slot) response.
pub const EXTENDED_WEIGHTS: [f64; NUM_SEQUENCES] = [0.25, 0.25, 0.5];

/// Walsh rows used for the three sequences.
///
/// Each DFT bin of the four-slot period is excited by exactly one row, and
/// with [`EXTENDED_WEIGHTS`] the weighted periodic autocorrelations of the
/// rows sum to a delta.
pub fn polarity_rows() -> PolarityMatrix {
    [[1, 1, 1, 1], [1, -1, 1, -1], [1, 1, -1, -1]]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceLayout {
    /// Allocation interval N_u (samples at the audio rate).
    pub unit_interval: usize,
    pub slots_per_period: usize,
    pub num_allocations: usize,
    pub polarity: PolarityMatrix,
}

impl Default for SequenceLayout {
    fn default() -> Self {
        Self {
            unit_interval: 24576,
            slots_per_period: SLOTS_PER_PERIOD,
            num_allocations: 36,
            polarity: polarity_rows(),
        }
    }
}

impl SequenceLayout {
    pub fn with_interval(unit_interval: usize) -> Self {
        Self {
            unit_interval,
            ..Self::default()
        }
    }

    pub fn period(&self) -> usize {
        self.slots_per_period * self.unit_interval
    }

    pub fn num_periods(&self) -> usize {
        self.num_allocations / self.slots_per_period
    }

    pub fn validate(&self) -> Result<()> {
        if self.slots_per_period != SLOTS_PER_PERIOD {
            return Err(Error::Config(format!(
                "only {SLOTS_PER_PERIOD} slots per period are supported"
            )));
        }
        if self.unit_interval == 0 {
            return Err(Error::Config("allocation interval must be positive".into()));
        }
        if self.num_allocations == 0 || self.num_allocations % self.slots_per_period != 0 {
            return Err(Error::Config(format!(
                "allocation count {} is not a whole number of periods",
                self.num_allocations
            )));
        }
        if self.num_periods() < 3 {
            return Err(Error::Config("at least three periods are required".into()));
        }
        for (i, a) in self.polarity.iter().enumerate() {
            if a.iter().any(|&v| v != 1 && v != -1) {
                return Err(Error::Config(format!("polarity row {i} is not binary")));
            }
            for b in &self.polarity[i + 1..] {
                if dot(a, b) != 0 {
                    return Err(Error::Config("polarity rows are not orthogonal".into()));
                }
            }
        }
        Ok(())
    }
}

pub fn dot(a: &[i8; SLOTS_PER_PERIOD], b: &[i8; SLOTS_PER_PERIOD]) -> i32 {
    a.iter().zip(b).map(|(&x, &y)| x as i32 * y as i32).sum()
}

#[derive(Debug, Clone)]
pub struct ModulationExcitation {
    pub samples: Vec<f64>,
    pub layout: SequenceLayout,
    /// Half-open sample range `[start, end)` that is exactly periodic.
    pub steady_region: (usize, usize),
}

/// Overlap-adds `num_allocations` copies of each unit with the polarity of
/// its sequence: `x[n] = sum_k sum_a rows[k][a mod 4] * unit_k[n - a N_u]`.
pub fn build_excitation(units: &[UnitCapricep], layout: &SequenceLayout) -> Result<ModulationExcitation> {
    layout.validate()?;
    if units.len() != NUM_SEQUENCES {
        return Err(Error::Argument(format!(
            "{NUM_SEQUENCES} units are required, got {}",
            units.len()
        )));
    }
    let rate = units[0].sample_rate;
    if units.iter().any(|u| u.sample_rate != rate) {
        return Err(Error::Argument("units have inconsistent sample rates".into()));
    }
    let unit_len = units.iter().map(UnitCapricep::len).max().unwrap_or(0);
    if unit_len == 0 {
        return Err(Error::Argument("units are empty".into()));
    }
    if unit_len > layout.period() {
        return Err(Error::Argument(format!(
            "unit length {unit_len} exceeds the period {}",
            layout.period()
        )));
    }

    let n_u = layout.unit_interval;
    let mut samples = vec![0.0; layout.num_allocations * n_u + unit_len - 1];
    for a in 0..layout.num_allocations {
        let slot = a % layout.slots_per_period;
        let offset = a * n_u;
        for (k, unit) in units.iter().enumerate() {
            let sign = layout.polarity[k][slot] as f64;
            for (dst, &v) in samples[offset..offset + unit.len()].iter_mut().zip(&unit.samples) {
                *dst += sign * v;
            }
        }
    }

    let period = layout.period();
    Ok(ModulationExcitation {
        samples,
        layout: layout.clone(),
        steady_region: (period, (layout.num_periods() - 1) * period),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capricep::{generate_unit, UnitConfig};

    fn delta(len: usize) -> UnitCapricep {
        let mut samples = vec![0.0; len];
        samples[0] = 1.0;
        UnitCapricep {
            samples,
            sample_rate: 1000.0,
            seed: 0,
            id: 0,
        }
    }

    #[test]
    fn rows_are_orthogonal() {
        let r = polarity_rows();
        assert_eq!(dot(&r[0], &r[1]), 0);
        assert_eq!(dot(&r[0], &r[2]), 0);
        assert_eq!(dot(&r[1], &r[2]), 0);
        for row in &r {
            assert_eq!(dot(row, row), 4);
        }
    }

    #[test]
    fn weighted_periodic_autocorrelation_is_a_delta() {
        let r = polarity_rows();
        for lag in 0..SLOTS_PER_PERIOD {
            let total: f64 = r
                .iter()
                .zip(EXTENDED_WEIGHTS)
                .map(|(row, w)| {
                    let ac: i32 = (0..4).map(|s| row[s] as i32 * row[(s + lag) % 4] as i32).sum();
                    w * ac as f64 / 4.0
                })
                .sum();
            assert_eq!(total, if lag == 0 { 1.0 } else { 0.0 }, "lag {lag}");
        }
    }

    #[test]
    fn delta_unit_makes_impulse_train() {
        // one non-zero unit, other two silent: impulse train with period N_u
        let mut layout = SequenceLayout::with_interval(10);
        layout.num_allocations = 12;
        let silent = UnitCapricep {
            samples: vec![0.0],
            ..delta(1)
        };
        let ex = build_excitation(&[delta(1), silent.clone(), silent], &layout).unwrap();
        for (i, &v) in ex.samples.iter().enumerate() {
            assert_eq!(v, if i % 10 == 0 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn default_length_is_about_twenty_seconds() {
        let layout = SequenceLayout::default();
        let n = layout.num_allocations * layout.unit_interval;
        assert_eq!(n, 884_736);
        assert!((n as f64 / 44100.0 - 20.06).abs() < 0.01);
    }

    #[test]
    fn steady_region_is_exactly_periodic() {
        let cfg = UnitConfig {
            num_sections: 30,
            duration_s: 0.004,
            sample_rate: 8000.0,
            ..UnitConfig::default()
        };
        let units: Vec<_> = (0..3).map(|s| generate_unit(s, &cfg).unwrap()).collect();
        let layout = SequenceLayout::with_interval(20);
        let ex = build_excitation(&units, &layout).unwrap();
        let p = layout.period();
        let (start, end) = ex.steady_region;
        for n in start..end - p {
            assert_eq!(ex.samples[n], ex.samples[n + p]);
        }
    }

    #[test]
    fn inconsistent_rates_are_rejected() {
        let mut b = delta(1);
        b.sample_rate = 2000.0;
        let layout = SequenceLayout::with_interval(10);
        assert!(matches!(
            build_excitation(&[delta(1), b, delta(1)], &layout),
            Err(Error::Argument(_))
        ));
    }

    /// Four-slot toy: three distinct pulses mixed with the rows and un-mixed
    /// with rows/4 come back exactly.
    #[test]
    fn toy_unmixing_recovers_each_pulse() {
        let rows = polarity_rows();
        let pulses = [[1.0, 0.5, -0.25], [0.0, -2.0, 1.0], [3.0, 0.0, 0.125]];
        let mut slots = [[0.0; 3]; 4];
        for (k, p) in pulses.iter().enumerate() {
            for s in 0..4 {
                for i in 0..3 {
                    slots[s][i] += rows[k][s] as f64 * p[i];
                }
            }
        }
        for (k, p) in pulses.iter().enumerate() {
            for i in 0..3 {
                let rec: f64 = (0..4).map(|s| rows[k][s] as f64 * slots[s][i]).sum::<f64>() / 4.0;
                assert_eq!(rec, p[i]);
            }
        }
    }
}

//! Filtered versus unfiltered timing runs.

use std::fmt;
use std::time::Instant;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::density::{generate_normalized, DensityMap, GenerationConfig, PhaseTimings};
use crate::error::{Error, Result};
use crate::gaze::Fixation;
use crate::geometry::{SampledMesh, Scene};

/// Mean, sample standard deviation and 95% confidence half-width (Student
/// t with `n - 1` degrees of freedom).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub ci95: f64,
}

impl Stats {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { n, mean: f64::NAN, std_dev: f64::NAN, ci95: f64::NAN };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Self { n, mean, std_dev: 0.0, ci95: f64::NAN };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let std_dev = var.sqrt();
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975);
        Self { n, mean, std_dev, ci95: t * std_dev / (n as f64).sqrt() }
    }
}

impl fmt::Display for Stats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:>9.3} {:>9.3}   [{:.3}, {:.3}]", self.mean, self.std_dev, self.mean - self.ci95, self.mean + self.ci95)
    }
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub repetitions: usize,
    pub fixations: usize,
    pub filtered: Stats,
    pub unfiltered: Stats,
    /// Mean phase timings of the last filtered and unfiltered runs.
    pub filtered_phases: PhaseTimings,
    pub unfiltered_phases: PhaseTimings,
    /// Every repetition of a path produced bit-identical values.
    pub values_stable: bool,
    pub filtered_map: DensityMap,
    pub unfiltered_map: DensityMap,
}

impl BenchReport {
    /// Unfiltered mean time over filtered mean time.
    pub fn speedup(&self) -> f64 {
        self.unfiltered.mean / self.filtered.mean
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} fixations, n = {}", self.fixations, self.repetitions)?;
        writeln!(f, "{:<26}{:>9} {:>9}   CI (95%)", "seconds", "mean", "sd")?;
        writeln!(f, "{:<26}{}", "with sample filtering", self.filtered)?;
        writeln!(f, "{:<26}{}", "without sample filtering", self.unfiltered)?;
        writeln!(f, "speedup (unfiltered / filtered): {:.2}x", self.speedup())?;
        write!(f, "values identical across repetitions: {}", if self.values_stable { "yes" } else { "NO" })
    }
}

/// Runs filtered and unfiltered generation (with normalization)
/// `repetitions` times each, alternating, and collects wall-clock times.
pub fn run_bench(
    scene: &Scene,
    sampled: &[SampledMesh],
    fixations: &[Fixation],
    config: &GenerationConfig,
    repetitions: usize,
    mut progress: impl FnMut(usize, bool, f64),
) -> Result<BenchReport> {
    if repetitions == 0 {
        return Err(Error::config("repetitions", "must be at least 1"));
    }
    let mut times = [Vec::new(), Vec::new()];
    let mut maps: [Option<DensityMap>; 2] = [None, None];
    let mut phases = [PhaseTimings::default(); 2];
    let mut stable = true;
    let mut counted = 0;
    for rep in 0..repetitions {
        for (slot, filtering_enabled) in [(0, true), (1, false)] {
            let cfg = GenerationConfig { filtering_enabled, ..config.clone() };
            let t = Instant::now();
            let g = generate_normalized(scene, sampled, fixations, &cfg, |_, _| {})?;
            let secs = t.elapsed().as_secs_f64();
            times[slot].push(secs);
            phases[slot] = g.timings;
            counted = g.fixations;
            match &maps[slot] {
                Some(m) => stable &= m.bit_identical(&g.map),
                None => maps[slot] = Some(g.map),
            }
            progress(rep + 1, filtering_enabled, secs);
        }
    }
    let [filtered_map, unfiltered_map] = maps.map(|m| m.expect("at least one repetition"));
    Ok(BenchReport {
        repetitions,
        fixations: counted,
        filtered: Stats::from_samples(&times[0]),
        unfiltered: Stats::from_samples(&times[1]),
        filtered_phases: phases[0],
        unfiltered_phases: phases[1],
        values_stable: stable,
        filtered_map,
        unfiltered_map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn confidence_interval_uses_t_quantile() {
        let xs = [6.2, 6.9, 6.5, 6.6, 6.3, 7.0, 6.4, 6.8, 6.5, 6.6];
        let s = Stats::from_samples(&xs);
        assert_relative_eq!(s.mean, 6.58, epsilon = 1e-12);
        // t(0.975, 9) = 2.2621571627...
        assert_relative_eq!(s.ci95, 2.262_157_162_8 * s.std_dev / 10f64.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn degenerate_samples() {
        assert!(Stats::from_samples(&[]).mean.is_nan());
        let one = Stats::from_samples(&[2.0]);
        assert_eq!((one.mean, one.std_dev), (2.0, 0.0));
    }
}

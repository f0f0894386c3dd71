//! Analog Monte Carlo transport with radial collision tallies.
//!
//! Particles are born at the origin of an infinite homogeneous medium,
//! fly free paths drawn from the problem's [`PathLengthLaw`], and at each
//! collision either scatter isotropically (probability `c`, path length
//! reset) or are absorbed. Collisions are scored into spherical shells.
//!
//! Reproducibility contract: history `h` draws from the ChaCha8 stream `h`
//! of the master seed, histories are processed in fixed-size chunks, and
//! chunk results are merged in chunk order. The tally is therefore
//! bit-identical for any rayon worker count, and identical to the
//! sequential fallback ([`run_histories_serial`]).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::Error;
use crate::pathlen::PathLengthLaw;

/// Histories per work item; fixed so the merge tree does not depend on the
/// number of workers.
const HISTORY_CHUNK: u64 = 4096;

/// Source specification.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    PointIsotropicAtOrigin { strength: f64 },
}

impl Source {
    pub fn strength(&self) -> f64 {
        match self {
            Source::PointIsotropicAtOrigin { strength } => *strength,
        }
    }
}

/// A transport problem in an infinite homogeneous medium.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportProblem {
    pub law: PathLengthLaw,
    /// Scattering ratio `c` in [0, 1).
    pub scattering_ratio: f64,
    pub source: Source,
}

impl TransportProblem {
    pub fn new(law: PathLengthLaw, scattering_ratio: f64, source: Source) -> Result<Self, Error> {
        if !(0.0..1.0).contains(&scattering_ratio) {
            return Err(Error::domain(format!(
                "scattering ratio must lie in [0, 1), got {scattering_ratio}"
            )));
        }
        let Source::PointIsotropicAtOrigin { strength } = &source;
        if !(*strength > 0.0) || !strength.is_finite() {
            return Err(Error::domain(format!(
                "source strength must be positive, got {strength}"
            )));
        }
        Ok(TransportProblem {
            law,
            scattering_ratio,
            source,
        })
    }

    /// Diffusion decay rate `kappa = sqrt(6 (1 - c) / <s^2>)` of the problem.
    pub fn diffusion_kappa(&self) -> Result<f64, Error> {
        let m = self.law.moments()?;
        Ok((6.0 * (1.0 - self.scattering_ratio) / m.second).sqrt())
    }
}

/// A particle in flight.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: [f64; 3],
    /// Unit direction of flight.
    pub direction: [f64; 3],
    /// Distance traveled since birth or the last collision.
    pub path_length_since_event: f64,
    pub alive: bool,
}

impl Particle {
    pub fn emit_at_origin<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Particle {
            position: [0.0; 3],
            direction: isotropic_direction(rng),
            path_length_since_event: 0.0,
            alive: true,
        }
    }

    /// Fly a distance `s` along the current direction.
    pub fn advance(&mut self, s: f64) {
        for (p, d) in self.position.iter_mut().zip(self.direction) {
            *p += s * d;
        }
        self.path_length_since_event = s;
    }

    /// Isotropic re-emission at the current position; resets the path length.
    pub fn scatter<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.direction = isotropic_direction(rng);
        self.path_length_since_event = 0.0;
    }

    pub fn radius(&self) -> f64 {
        dot(self.position, self.position).sqrt()
    }
}

/// Uniform direction on the unit sphere: cosine of the polar angle uniform
/// on [-1, 1], azimuth uniform on [0, 2 pi).
pub fn isotropic_direction<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    let mu: f64 = 2.0 * rng.random::<f64>() - 1.0;
    let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
    let sin_theta = (1.0 - mu * mu).max(0.0).sqrt();
    [sin_theta * phi.cos(), sin_theta * phi.sin(), mu]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// How capture is simulated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CaptureModel {
    /// Terminate with probability `1 - c` at each collision (default).
    Analog,
    /// Carry statistical weight: every collision scores the current weight
    /// and multiplies it by `c`; below `weight_cutoff` the particle plays
    /// Russian roulette with survival probability `roulette_survival`.
    Implicit {
        weight_cutoff: f64,
        roulette_survival: f64,
    },
}

/// Shell edges plus tally options.
#[derive(Debug, Clone, PartialEq)]
pub struct TallySpec {
    edges: Vec<f64>,
    track_length: bool,
    capture: CaptureModel,
}

impl TallySpec {
    /// Validate strictly increasing shell edges with `edges[0] >= 0`.
    pub fn new(edges: Vec<f64>) -> Result<Self, Error> {
        if edges.len() < 2 {
            return Err(Error::domain("tally needs at least two shell edges"));
        }
        if !(edges[0] >= 0.0) {
            return Err(Error::domain("innermost shell edge must be >= 0"));
        }
        if edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::domain("shell edges must be finite"));
        }
        for w in edges.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::domain(format!(
                    "shell edges must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        Ok(TallySpec {
            edges,
            track_length: false,
            capture: CaptureModel::Analog,
        })
    }

    /// `n` uniform shells on `[0, r_max]`.
    pub fn uniform(r_max: f64, n: usize) -> Result<Self, Error> {
        if !(r_max > 0.0) || n == 0 {
            return Err(Error::domain("uniform tally needs r_max > 0 and n >= 1"));
        }
        let edges = (0..=n).map(|k| r_max * k as f64 / n as f64).collect();
        Self::new(edges)
    }

    /// Default binning: 60 uniform shells out to `12 / kappa`, which covers
    /// the diffusion decay length of the problem with negligible leakage.
    pub fn default_for(problem: &TransportProblem) -> Result<Self, Error> {
        let kappa = problem.diffusion_kappa()?;
        Self::uniform(12.0 / kappa, 60)
    }

    /// Also accumulate a track-length flux estimate (diagnostic).
    pub fn with_track_length(mut self) -> Self {
        self.track_length = true;
        self
    }

    /// Switch from analog to implicit capture with Russian roulette below
    /// `weight_cutoff`.
    pub fn with_implicit_capture(
        mut self,
        weight_cutoff: f64,
        roulette_survival: f64,
    ) -> Result<Self, Error> {
        if !(0.0 < weight_cutoff && weight_cutoff < 1.0) {
            return Err(Error::domain(format!(
                "weight cutoff must lie in (0, 1), got {weight_cutoff}"
            )));
        }
        if !(0.0 < roulette_survival && roulette_survival < 1.0) {
            return Err(Error::domain(format!(
                "roulette survival must lie in (0, 1), got {roulette_survival}"
            )));
        }
        self.capture = CaptureModel::Implicit {
            weight_cutoff,
            roulette_survival,
        };
        Ok(self)
    }

    pub fn capture(&self) -> CaptureModel {
        self.capture
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn shells(&self) -> usize {
        self.edges.len() - 1
    }
}

/// Merged result of a batch of histories.
///
/// Weight sums are exact integers under analog capture, so merging is
/// exactly associative there; all floating accumulation happens in a fixed
/// chunk order either way, keeping results independent of scheduling.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialTally {
    edges: Vec<f64>,
    /// Scoring events per shell.
    counts: Vec<u64>,
    /// Summed collision weights per shell.
    weight_sums: Vec<f64>,
    /// Per shell, the sum over histories of (weight this history put in the
    /// shell)^2, for history-based statistics.
    weight_sq_sums: Vec<f64>,
    underflow: u64,
    overflow: u64,
    underflow_weight: f64,
    overflow_weight: f64,
    track_lengths: Option<Vec<f64>>,
    histories: u64,
    total_collisions: u64,
    total_weight: f64,
}

/// One shell of a tally, reduced to physical estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellEstimate {
    pub r_lo: f64,
    pub r_hi: f64,
    pub r_mid: f64,
    /// Estimate per unit volume per source particle.
    pub value: f64,
    /// Absolute standard error of `value` (NaN when undefined).
    pub abs_std_err: f64,
    /// `abs_std_err / value` (NaN for empty shells).
    pub rel_std_err: f64,
    pub count: u64,
}

impl RadialTally {
    fn empty(spec: &TallySpec) -> Self {
        let shells = spec.shells();
        RadialTally {
            edges: spec.edges.clone(),
            counts: vec![0; shells],
            weight_sums: vec![0.0; shells],
            weight_sq_sums: vec![0.0; shells],
            underflow: 0,
            overflow: 0,
            underflow_weight: 0.0,
            overflow_weight: 0.0,
            track_lengths: spec.track_length.then(|| vec![0.0; shells]),
            histories: 0,
            total_collisions: 0,
            total_weight: 0.0,
        }
    }

    fn merge(mut self, other: RadialTally) -> Self {
        debug_assert_eq!(self.edges, other.edges);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        for (a, b) in self.weight_sums.iter_mut().zip(&other.weight_sums) {
            *a += b;
        }
        for (a, b) in self.weight_sq_sums.iter_mut().zip(&other.weight_sq_sums) {
            *a += b;
        }
        if let (Some(mine), Some(theirs)) = (&mut self.track_lengths, &other.track_lengths) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                *a += b;
            }
        }
        self.underflow += other.underflow;
        self.overflow += other.overflow;
        self.underflow_weight += other.underflow_weight;
        self.overflow_weight += other.overflow_weight;
        self.histories += other.histories;
        self.total_collisions += other.total_collisions;
        self.total_weight += other.total_weight;
        self
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn histories(&self) -> u64 {
        self.histories
    }

    pub fn total_collisions(&self) -> u64 {
        self.total_collisions
    }

    /// Collisions beyond the outermost edge.
    pub fn overflow_count(&self) -> u64 {
        self.overflow
    }

    /// Collisions below the innermost edge (zero when it is 0).
    pub fn underflow_count(&self) -> u64 {
        self.underflow
    }

    /// Scoring events per history (equals collisions under analog capture).
    pub fn mean_collisions_per_history(&self) -> f64 {
        self.total_collisions as f64 / self.histories as f64
    }

    /// Summed collision weight per history; its expectation is
    /// `1 / (1 - c)` under either capture model.
    pub fn mean_weight_per_history(&self) -> f64 {
        self.total_weight / self.histories as f64
    }

    /// Weight scored outside the shells (below the first edge, beyond the
    /// last).
    pub fn out_of_range_weight(&self) -> f64 {
        self.underflow_weight + self.overflow_weight
    }

    pub fn shell_volume(&self, k: usize) -> f64 {
        let (lo, hi) = (self.edges[k], self.edges[k + 1]);
        4.0 * std::f64::consts::PI / 3.0 * (hi * hi * hi - lo * lo * lo)
    }

    /// Collision-rate density estimates per shell, per source particle.
    ///
    /// Empty shells get a zero estimate with NaN (flagged) standard errors.
    pub fn estimates(&self) -> Vec<ShellEstimate> {
        let n = self.histories as f64;
        (0..self.counts.len())
            .map(|k| {
                let vol = self.shell_volume(k);
                let mean = self.weight_sums[k] / n;
                let m2 = self.weight_sq_sums[k] / n;
                let var = ((m2 - mean * mean) * n / (n - 1.0)).max(0.0);
                let se_mean = (var / n).sqrt();
                let value = mean / vol;
                let abs_std_err = se_mean / vol;
                ShellEstimate {
                    r_lo: self.edges[k],
                    r_hi: self.edges[k + 1],
                    r_mid: 0.5 * (self.edges[k] + self.edges[k + 1]),
                    value,
                    abs_std_err: if self.counts[k] > 0 {
                        abs_std_err
                    } else {
                        f64::NAN
                    },
                    rel_std_err: if self.counts[k] > 0 {
                        abs_std_err / value
                    } else {
                        f64::NAN
                    },
                    count: self.counts[k],
                }
            })
            .collect()
    }

    /// Track-length flux estimate per shell (per volume per source
    /// particle), if it was enabled in the [`TallySpec`].
    ///
    /// Diagnostic only: its ratio to the collision-density estimate is the
    /// sampled law's first moment, which exposes how far that moment sits
    /// from the true mean free path of the medium.
    pub fn track_length_flux(&self) -> Option<Vec<f64>> {
        let tl = self.track_lengths.as_ref()?;
        let n = self.histories as f64;
        Some(
            tl.iter()
                .enumerate()
                .map(|(k, t)| t / (n * self.shell_volume(k)))
                .collect(),
        )
    }
}

/// Scale collision-density estimates into scalar-flux estimates
/// `phi_0 = <s> f`. Which mean free path to use (the true medium value or
/// the sampled law's first moment) is the caller's choice.
pub fn scalar_flux_estimate(
    tally: &RadialTally,
    mean_free_path: f64,
) -> Result<Vec<ShellEstimate>, Error> {
    if !(mean_free_path > 0.0) || !mean_free_path.is_finite() {
        return Err(Error::domain(format!(
            "mean free path must be positive, got {mean_free_path}"
        )));
    }
    Ok(tally
        .estimates()
        .into_iter()
        .map(|mut e| {
            e.value *= mean_free_path;
            e.abs_std_err *= mean_free_path;
            e
        })
        .collect())
}

/// Shell index of radius `r`: `-1` below the first edge, `shells()` at or
/// beyond the last.
fn shell_index(edges: &[f64], r: f64) -> isize {
    edges.partition_point(|&e| e <= r) as isize - 1
}

struct HistoryScratch {
    /// Per-shell event counts and scored weights for the current history;
    /// slots `[0, K)` are shells, `K` overflow, `K + 1` underflow.
    local_counts: Vec<u32>,
    local_weights: Vec<f64>,
    touched: Vec<usize>,
    track: Vec<f64>,
    track_touched: Vec<usize>,
}

/// Run `n_histories` histories with the given master seed.
///
/// With the `parallel` feature (default) chunks of histories run on rayon;
/// the result is bit-identical to [`run_histories_serial`] for any worker
/// count.
pub fn run_histories(
    problem: &TransportProblem,
    spec: &TallySpec,
    n_histories: u64,
    master_seed: u64,
) -> Result<RadialTally, Error> {
    check_histories(n_histories)?;
    #[cfg(feature = "parallel")]
    {
        let partials: Vec<RadialTally> = chunk_ranges(n_histories)
            .into_par_iter()
            .map(|(start, len)| run_chunk(problem, spec, start, len, master_seed))
            .collect();
        Ok(partials
            .into_iter()
            .fold(RadialTally::empty(spec), RadialTally::merge))
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_histories_serial(problem, spec, n_histories, master_seed)
    }
}

/// Sequential reference implementation; same chunking and merge order as the
/// parallel path, so the two agree bit for bit.
pub fn run_histories_serial(
    problem: &TransportProblem,
    spec: &TallySpec,
    n_histories: u64,
    master_seed: u64,
) -> Result<RadialTally, Error> {
    check_histories(n_histories)?;
    Ok(chunk_ranges(n_histories)
        .into_iter()
        .map(|(start, len)| run_chunk(problem, spec, start, len, master_seed))
        .fold(RadialTally::empty(spec), RadialTally::merge))
}

fn check_histories(n: u64) -> Result<(), Error> {
    if n == 0 {
        return Err(Error::domain("n_histories must be at least 1"));
    }
    Ok(())
}

fn chunk_ranges(n_histories: u64) -> Vec<(u64, u64)> {
    (0..n_histories)
        .step_by(HISTORY_CHUNK as usize)
        .map(|start| (start, HISTORY_CHUNK.min(n_histories - start)))
        .collect()
}

fn run_chunk(
    problem: &TransportProblem,
    spec: &TallySpec,
    first_history: u64,
    n: u64,
    master_seed: u64,
) -> RadialTally {
    let shells = spec.shells();
    let mut tally = RadialTally::empty(spec);
    let mut scratch = HistoryScratch {
        local_counts: vec![0; shells + 2],
        local_weights: vec![0.0; shells + 2],
        touched: Vec::with_capacity(16),
        track: vec![0.0; shells],
        track_touched: Vec::with_capacity(16),
    };

    for h in first_history..first_history + n {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(h);
        run_history(problem, spec, &mut rng, &mut scratch);

        for &slot in &scratch.touched {
            let c = scratch.local_counts[slot] as u64;
            let w = scratch.local_weights[slot];
            scratch.local_counts[slot] = 0;
            scratch.local_weights[slot] = 0.0;
            if slot < shells {
                tally.counts[slot] += c;
                tally.weight_sums[slot] += w;
                tally.weight_sq_sums[slot] += w * w;
            } else if slot == shells {
                tally.overflow += c;
                tally.overflow_weight += w;
            } else {
                tally.underflow += c;
                tally.underflow_weight += w;
            }
            tally.total_collisions += c;
            tally.total_weight += w;
        }
        scratch.touched.clear();

        if let Some(tl) = &mut tally.track_lengths {
            for &k in &scratch.track_touched {
                tl[k] += scratch.track[k];
                scratch.track[k] = 0.0;
            }
            scratch.track_touched.clear();
        }
    }
    tally.histories = n;
    tally
}

fn run_history(
    problem: &TransportProblem,
    spec: &TallySpec,
    rng: &mut ChaCha8Rng,
    scratch: &mut HistoryScratch,
) {
    let shells = spec.shells();
    let edges = &spec.edges;
    let mut particle = Particle::emit_at_origin(rng);
    let mut weight = 1.0f64;

    loop {
        let start = particle.position;
        let s = problem.law.sample_free_path(rng);
        particle.advance(s);

        if spec.track_length {
            accumulate_track_lengths(
                start,
                particle.direction,
                s,
                weight,
                edges,
                &mut scratch.track,
                &mut scratch.track_touched,
            );
        }

        let idx = shell_index(edges, particle.radius());
        let slot = if idx < 0 {
            shells + 1
        } else if idx as usize >= shells {
            shells
        } else {
            idx as usize
        };
        if scratch.local_counts[slot] == 0 && scratch.local_weights[slot] == 0.0 {
            scratch.touched.push(slot);
        }
        scratch.local_counts[slot] += 1;
        scratch.local_weights[slot] += weight;

        match spec.capture {
            CaptureModel::Analog => {
                if rng.random::<f64>() < problem.scattering_ratio {
                    particle.scatter(rng);
                } else {
                    return;
                }
            }
            CaptureModel::Implicit {
                weight_cutoff,
                roulette_survival,
            } => {
                weight *= problem.scattering_ratio;
                if weight < weight_cutoff {
                    if rng.random::<f64>() < roulette_survival {
                        weight /= roulette_survival;
                    } else {
                        return;
                    }
                }
                particle.scatter(rng);
            }
        }
    }
}

/// Split the flight segment `start + t * dir`, `t` in `[0, s]`, at every
/// shell-edge crossing and add each piece's weighted length to its shell.
fn accumulate_track_lengths(
    start: [f64; 3],
    dir: [f64; 3],
    s: f64,
    weight: f64,
    edges: &[f64],
    out: &mut [f64],
    touched: &mut Vec<usize>,
) {
    let b = dot(start, dir);
    let r0_sq = dot(start, start);
    let radius_at = |t: f64| (r0_sq + t * (2.0 * b + t)).max(0.0).sqrt();
    // Radius along the segment decreases until t = -b, then increases.
    let turn = (-b).clamp(0.0, s);

    let mut cuts: Vec<f64> = Vec::with_capacity(8);
    cuts.push(0.0);

    if turn > 0.0 {
        // Decreasing branch on [0, turn]: crossings at t = -b - sqrt(...).
        let (ra, rb) = (radius_at(0.0), radius_at(turn));
        let mut j = edges.partition_point(|&e| e < ra);
        while j > 0 && edges[j - 1] > rb {
            let e = edges[j - 1];
            let disc = (b * b - r0_sq + e * e).max(0.0);
            cuts.push((-b - disc.sqrt()).clamp(0.0, s));
            j -= 1;
        }
        cuts.push(turn);
    }
    if turn < s {
        // Increasing branch on [turn, s]: crossings at t = -b + sqrt(...).
        let (ra, rb) = (radius_at(turn), radius_at(s));
        let mut j = edges.partition_point(|&e| e <= ra);
        while j < edges.len() && edges[j] < rb {
            let e = edges[j];
            let disc = (b * b - r0_sq + e * e).max(0.0);
            cuts.push((-b + disc.sqrt()).clamp(0.0, s));
            j += 1;
        }
    }
    cuts.push(s);

    let shells = edges.len() - 1;
    for w in cuts.windows(2) {
        let len = w[1] - w[0];
        if len <= 0.0 {
            continue;
        }
        let k = shell_index(edges, radius_at(0.5 * (w[0] + w[1])));
        if (0..shells as isize).contains(&k) {
            let k = k as usize;
            if out[k] == 0.0 {
                touched.push(k);
            }
            out[k] += weight * len;
        }
    }
}

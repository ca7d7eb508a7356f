//! Seeded samplers for the synthetic test spaces: circles, wedges (chains of
//! externally tangent circles), and unit circles with interior chords, all
//! with optional Gaussian coordinate noise.
//!
//! Geometry conventions: a wedge places its component circles along a
//! horizontal chain with consecutive circles tangent at one point (centers
//! r_i + r_{i+1} apart); a chorded circle is the unit circle plus one
//! horizontal chord at height 0, or two at heights +-1/2. Any isometric
//! placement yields identical persistence; these are fixed for
//! reproducibility.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    Circle,
    Wedge,
    ChordedCircle,
}

/// Declarative description of one synthetic space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceSpec {
    pub kind: SpaceKind,
    /// Component radii: a single radius for a circle, one per component for
    /// a wedge. A chorded circle always has radius 1.
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    /// Number of chords for `chorded_circle` (1 or 2).
    #[serde(default)]
    pub chords: usize,
    /// Standard deviation of the Gaussian added independently to each
    /// Cartesian coordinate.
    #[serde(default)]
    pub noise_sigma: f64,
    pub label: String,
}

fn default_radii() -> Vec<f64> {
    vec![1.0]
}

impl SpaceSpec {
    pub fn circle(radius: f64, noise_sigma: f64, label: impl Into<String>) -> Self {
        SpaceSpec {
            kind: SpaceKind::Circle,
            radii: vec![radius],
            chords: 0,
            noise_sigma,
            label: label.into(),
        }
    }

    pub fn wedge(radii: Vec<f64>, noise_sigma: f64, label: impl Into<String>) -> Self {
        SpaceSpec {
            kind: SpaceKind::Wedge,
            radii,
            chords: 0,
            noise_sigma,
            label: label.into(),
        }
    }

    pub fn chorded_circle(chords: usize, noise_sigma: f64, label: impl Into<String>) -> Self {
        SpaceSpec {
            kind: SpaceKind::ChordedCircle,
            radii: vec![1.0],
            chords,
            noise_sigma,
            label: label.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.noise_sigma < 0.0 || !self.noise_sigma.is_finite() {
            return Err(Error::input(format!(
                "space {:?}: noise sigma must be nonnegative",
                self.label
            )));
        }
        if self.radii.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
            return Err(Error::input(format!(
                "space {:?}: radii must be positive",
                self.label
            )));
        }
        match self.kind {
            SpaceKind::Circle => {
                if self.radii.len() != 1 {
                    return Err(Error::input(format!(
                        "space {:?}: a circle takes exactly one radius",
                        self.label
                    )));
                }
            }
            SpaceKind::Wedge => {
                if self.radii.len() < 2 {
                    return Err(Error::input(format!(
                        "space {:?}: a wedge needs at least two component radii",
                        self.label
                    )));
                }
            }
            SpaceKind::ChordedCircle => {
                if self.radii != vec![1.0] {
                    return Err(Error::input(format!(
                        "space {:?}: a chorded circle has radius 1",
                        self.label
                    )));
                }
                if !(self.chords == 1 || self.chords == 2) {
                    return Err(Error::input(format!(
                        "space {:?}: chords must be 1 or 2, got {}",
                        self.label, self.chords
                    )));
                }
            }
        }
        Ok(())
    }

    /// Diameter of the noiseless geometry: 2r for a circle, width of the
    /// tangent chain for a wedge, 2 for a chorded circle.
    pub fn noiseless_diameter(&self) -> f64 {
        match self.kind {
            SpaceKind::Circle | SpaceKind::ChordedCircle => 2.0 * self.radii[0],
            SpaceKind::Wedge => 2.0 * self.radii.iter().sum::<f64>(),
        }
    }

    /// Radius of the largest component circle.
    pub fn max_component_radius(&self) -> f64 {
        self.radii.iter().copied().fold(0.0f64, f64::max)
    }

    pub fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<PointCloud> {
        self.validate()?;
        match self.kind {
            SpaceKind::Circle => sample_circle(self.radii[0], n, self.noise_sigma, rng),
            SpaceKind::Wedge => sample_wedge(&self.radii, n, self.noise_sigma, rng),
            SpaceKind::ChordedCircle => {
                sample_chorded_circle(self.chords, n, self.noise_sigma, rng)
            }
        }
    }
}

fn add_noise(points: &mut [Vec<f64>], sigma: f64, rng: &mut ChaCha8Rng) -> Result<()> {
    if sigma == 0.0 {
        return Ok(());
    }
    let normal = Normal::new(0.0, sigma)
        .map_err(|e| Error::input(format!("invalid noise sigma {sigma}: {e}")))?;
    for p in points {
        for c in p.iter_mut() {
            *c += normal.sample(rng);
        }
    }
    Ok(())
}

/// n points on a circle of the given radius centered at the origin: the
/// angle is Uniform(0, 2 pi), then independent N(0, sigma) noise is added to
/// each Cartesian coordinate.
pub fn sample_circle(radius: f64, n: usize, sigma: f64, rng: &mut ChaCha8Rng) -> Result<PointCloud> {
    if !(radius > 0.0) {
        return Err(Error::input(format!("radius must be positive, got {radius}")));
    }
    if n == 0 {
        return Err(Error::input("sample size must be at least 1"));
    }
    let mut points = circle_points(radius, (0.0, 0.0), n, rng);
    add_noise(&mut points, sigma, rng)?;
    PointCloud::new(points)
}

fn circle_points(
    radius: f64,
    center: (f64, f64),
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            vec![
                center.0 + radius * theta.cos(),
                center.1 + radius * theta.sin(),
            ]
        })
        .collect()
}

/// Chain of externally tangent circles along the x axis. The n points are
/// split as evenly as possible across components (remainder round-robin from
/// the first); each component is sampled like a circle around its own center
/// and noise is applied after placement.
pub fn sample_wedge(radii: &[f64], n: usize, sigma: f64, rng: &mut ChaCha8Rng) -> Result<PointCloud> {
    if radii.is_empty() || radii.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::input("wedge radii must be positive"));
    }
    if n < radii.len() {
        return Err(Error::input(format!(
            "sample size {n} is smaller than the number of components {}",
            radii.len()
        )));
    }
    let centers = wedge_centers(radii);
    let base = n / radii.len();
    let remainder = n % radii.len();
    let mut points = Vec::with_capacity(n);
    for (i, (&r, &c)) in radii.iter().zip(&centers).enumerate() {
        let count = base + usize::from(i < remainder);
        points.extend(circle_points(r, (c, 0.0), count, rng));
    }
    add_noise(&mut points, sigma, rng)?;
    PointCloud::new(points)
}

/// x coordinates of the component centers: consecutive circles tangent.
pub fn wedge_centers(radii: &[f64]) -> Vec<f64> {
    let mut centers = Vec::with_capacity(radii.len());
    let mut x = 0.0;
    for (i, &r) in radii.iter().enumerate() {
        if i > 0 {
            x += radii[i - 1] + r;
        }
        centers.push(x);
    }
    centers
}

/// Unit circle plus 1 horizontal chord at height 0, or 2 at heights +-1/2.
/// Each point independently lands on a component with probability
/// proportional to its arc/segment length, then uniformly along it.
pub fn sample_chorded_circle(
    chords: usize,
    n: usize,
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Result<PointCloud> {
    if !(chords == 1 || chords == 2) {
        return Err(Error::input(format!("chords must be 1 or 2, got {chords}")));
    }
    if n == 0 {
        return Err(Error::input("sample size must be at least 1"));
    }
    // chord at height y spans x in [-half, half], half = sqrt(1 - y^2)
    let heights: Vec<f64> = if chords == 1 { vec![0.0] } else { vec![-0.5, 0.5] };
    let segments: Vec<(f64, f64)> = heights
        .iter()
        .map(|&y| (y, (1.0 - y * y).sqrt()))
        .collect();
    let circle_len = std::f64::consts::TAU;
    let total_len: f64 = circle_len + segments.iter().map(|&(_, h)| 2.0 * h).sum::<f64>();
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let mut pick = rng.random::<f64>() * total_len;
        if pick < circle_len {
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            points.push(vec![theta.cos(), theta.sin()]);
            continue;
        }
        pick -= circle_len;
        let mut placed = false;
        for &(y, half) in &segments {
            let len = 2.0 * half;
            if pick < len {
                let x = -half + rng.random::<f64>() * len;
                points.push(vec![x, y]);
                placed = true;
                break;
            }
            pick -= len;
        }
        if !placed {
            // guard against the vanishing probability of pick == total_len
            let (y, half) = segments[segments.len() - 1];
            points.push(vec![half, y]);
        }
    }
    add_noise(&mut points, sigma, rng)?;
    PointCloud::new(points)
}

/// One simulated trial: which spaces, how many clouds per group, how many
/// points per cloud (one entry per group), and the master seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialPlan {
    pub specs: Vec<SpaceSpec>,
    pub clouds_per_group: usize,
    #[serde(deserialize_with = "usize_one_or_many")]
    pub points_per_cloud: Vec<usize>,
    pub seed: u64,
}

fn usize_one_or_many<'de, D>(deserializer: D) -> std::result::Result<Vec<usize>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(usize),
        Many(Vec<usize>),
    }
    Ok(match OneOrMany::deserialize(deserializer)? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) => v,
    })
}

impl TrialPlan {
    /// Per-group cloud sizes, broadcasting a single entry to all groups.
    pub fn group_sizes(&self) -> Result<Vec<usize>> {
        let s = self.specs.len();
        let sizes = match self.points_per_cloud.len() {
            1 => vec![self.points_per_cloud[0]; s],
            n if n == s => self.points_per_cloud.clone(),
            n => {
                return Err(Error::input(format!(
                    "points_per_cloud has {n} entries for {s} spaces"
                )))
            }
        };
        if sizes.iter().any(|&k| k == 0) {
            return Err(Error::input("points_per_cloud entries must be positive"));
        }
        Ok(sizes)
    }

    pub fn validate(&self) -> Result<()> {
        if self.specs.len() < 2 {
            return Err(Error::input("a trial plan needs at least two spaces"));
        }
        let mut labels: Vec<&str> = self.specs.iter().map(|s| s.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::input("space labels must be distinct"));
        }
        if self.clouds_per_group < 2 {
            return Err(Error::input("clouds_per_group must be at least 2"));
        }
        for spec in &self.specs {
            spec.validate()?;
        }
        self.group_sizes().map(|_| ())
    }
}

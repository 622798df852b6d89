use serde::{Deserialize, Serialize};

use super::{RodAxis, WoodpileSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CuboidKind {
    Rod,
    Buffer,
    Defect,
}

impl CuboidKind {
    pub fn priority(self) -> u8 {
        match self {
            CuboidKind::Rod => 1,
            CuboidKind::Buffer => 2,
            CuboidKind::Defect => 3,
        }
    }
}

/// Axis-aligned box with closed faces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cuboid {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub index: f64,
    pub kind: CuboidKind,
}

impl Cuboid {
    pub fn centered(center: [f64; 3], size: [f64; 3], index: f64, kind: CuboidKind) -> Self {
        let mut min = [0.0; 3];
        let mut max = [0.0; 3];
        for i in 0..3 {
            min[i] = center[i] - 0.5 * size[i];
            max[i] = center[i] + 0.5 * size[i];
        }
        Self { min, max, index, kind }
    }

    #[inline]
    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|i| (self.max[i] - self.min[i]).max(0.0)).product()
    }

    pub fn center(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| 0.5 * (self.min[i] + self.max[i]))
    }

    /// Overlap length of `[lo, hi]` with this cuboid along `axis`.
    pub fn overlap(&self, axis: usize, lo: f64, hi: f64) -> f64 {
        (self.max[axis].min(hi) - self.min[axis].max(lo)).max(0.0)
    }
}

/// Ordered cuboid list over a uniform background.
///
/// Lookup cost is kept low by binning cuboids along `z`.
#[derive(Debug, Clone)]
pub struct Scene {
    pub background: f64,
    cuboids: Vec<Cuboid>,
    bin_z0: f64,
    bin_dz: f64,
    bins: Vec<Vec<u32>>,
}

impl Scene {
    pub fn new(background: f64, cuboids: Vec<Cuboid>) -> Self {
        // stable sort keeps insertion order among equal priorities
        let mut cuboids = cuboids;
        cuboids.sort_by_key(|c| c.kind.priority());
        let mut scene = Self {
            background,
            cuboids,
            bin_z0: 0.0,
            bin_dz: 1.0,
            bins: Vec::new(),
        };
        scene.rebin();
        scene
    }

    fn rebin(&mut self) {
        if self.cuboids.is_empty() {
            self.bins.clear();
            return;
        }
        let zmin = self.cuboids.iter().map(|c| c.min[2]).fold(f64::INFINITY, f64::min);
        let zmax = self.cuboids.iter().map(|c| c.max[2]).fold(f64::NEG_INFINITY, f64::max);
        let nbins = (self.cuboids.len() / 8).clamp(1, 4096);
        let span = (zmax - zmin).max(f64::MIN_POSITIVE);
        self.bin_z0 = zmin;
        self.bin_dz = span / nbins as f64;
        self.bins = vec![Vec::new(); nbins];
        for (idx, c) in self.cuboids.iter().enumerate() {
            let (b0, b1) = (self.bin_of(c.min[2]), self.bin_of(c.max[2]));
            for b in b0..=b1 {
                self.bins[b].push(idx as u32);
            }
        }
    }

    #[inline]
    fn bin_of(&self, z: f64) -> usize {
        let b = ((z - self.bin_z0) / self.bin_dz).floor();
        if b <= 0.0 {
            0
        } else {
            (b as usize).min(self.bins.len() - 1)
        }
    }

    pub fn cuboids(&self) -> &[Cuboid] {
        &self.cuboids
    }

    /// Refractive index at `p`. The highest-priority cuboid containing the
    /// point wins; among equals the later one wins.
    pub fn index_at(&self, p: [f64; 3]) -> f64 {
        if self.bins.is_empty() {
            return self.background;
        }
        let mut best: Option<(u8, u32)> = None;
        // bin_of is monotone, so every cuboid containing p is listed in p's bin
        for &i in &self.bins[self.bin_of(p[2])] {
            let c = &self.cuboids[i as usize];
            if c.contains(p) {
                let key = (c.kind.priority(), i);
                if best.map_or(true, |k| key > k) {
                    best = Some(key);
                }
            }
        }
        best.map_or(self.background, |(_, i)| self.cuboids[i as usize].index)
    }

    pub fn bounds(&self) -> Option<([f64; 3], [f64; 3])> {
        let first = self.cuboids.first()?;
        let mut lo = first.min;
        let mut hi = first.max;
        for c in &self.cuboids {
            for i in 0..3 {
                lo[i] = lo[i].min(c.min[i]);
                hi[i] = hi[i].max(c.max[i]);
            }
        }
        Some((lo, hi))
    }

    pub fn defect(&self) -> Option<&Cuboid> {
        self.cuboids.iter().find(|c| c.kind == CuboidKind::Defect)
    }

    pub fn buffer(&self) -> Option<&Cuboid> {
        self.cuboids.iter().find(|c| c.kind == CuboidKind::Buffer)
    }

    /// Structured-text listing of all cuboids.
    pub fn to_toml(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            background: f64,
            cuboid: &'a [Cuboid],
        }
        toml::to_string(&Doc {
            background: self.background,
            cuboid: &self.cuboids,
        })
        .expect("scene serializes")
    }
}

/// Lay out the finite woodpile with its defect and buffer.
///
/// The scene origin is the defect site: the middle layer spans
/// `z ∈ [-h/2, h/2]`.
pub fn build_scene(spec: &WoodpileSpec) -> Result<Scene> {
    if (spec.defect.is_some() || spec.buffer.is_some()) && spec.layers < 3 {
        return Err(Error::Config(format!(
            "a defect needs a middle layer with neighbours; {} layer(s) given",
            spec.layers
        )));
    }
    spec.validate()?;
    let half_len = 0.5 * spec.lateral_extent();
    let mut cuboids = Vec::new();
    for k in 0..spec.layers {
        let z = spec.layer_z(k);
        let axis = spec.layer_axis(k);
        for off in spec.rod_offsets(k) {
            let t = off * spec.a;
            let (min, max) = match axis {
                RodAxis::X => (
                    [-half_len, t - 0.5 * spec.w, z - 0.5 * spec.h],
                    [half_len, t + 0.5 * spec.w, z + 0.5 * spec.h],
                ),
                RodAxis::Y => (
                    [t - 0.5 * spec.w, -half_len, z - 0.5 * spec.h],
                    [t + 0.5 * spec.w, half_len, z + 0.5 * spec.h],
                ),
            };
            cuboids.push(Cuboid {
                min,
                max,
                index: spec.n_rod,
                kind: CuboidKind::Rod,
            });
        }
    }
    let offset = spec.defect.map_or([0.0; 3], |d| d.offset);
    if let Some(b) = &spec.buffer {
        cuboids.push(Cuboid::centered(offset, b.size, spec.n_background, CuboidKind::Buffer));
    }
    if let Some(d) = &spec.defect {
        cuboids.push(Cuboid::centered(d.offset, d.size, spec.n_defect, CuboidKind::Defect));
    }
    Ok(Scene::new(spec.n_background, cuboids))
}

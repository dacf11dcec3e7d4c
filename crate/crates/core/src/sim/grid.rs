use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::real::Real;

/// Simulation times `0 = t_0 < ... < t_K = horizon` stepping by `1 / steps_per_year`,
/// with extra nodes inserted where a maturity falls between two uniform points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid<T: Real> {
    horizon: T,
    steps_per_year: usize,
    times: Vec<T>,
}

impl<T: Real> TimeGrid<T> {
    pub fn uniform(horizon: T, steps_per_year: usize) -> Result<Self> {
        Self::with_nodes(horizon, steps_per_year, &[])
    }

    /// Uniform grid that also contains every time in `nodes` (each must lie in `(0, horizon]`).
    pub fn with_nodes(horizon: T, steps_per_year: usize, nodes: &[T]) -> Result<Self> {
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(invalid(format!("grid horizon must be positive, got {horizon}")));
        }
        if steps_per_year == 0 {
            return Err(invalid("steps_per_year must be positive"));
        }
        let n = T::from_usize_lossy(steps_per_year);
        let step = T::one() / n;
        // nodes closer than this to an existing point are merged into it
        let snap = step * T::lit(1e-6);
        let mut times = Vec::new();
        let mut k = 0usize;
        loop {
            let t = T::from_usize_lossy(k) / n;
            if t >= horizon - snap {
                break;
            }
            times.push(t);
            k += 1;
        }
        times.push(horizon);
        for &node in nodes {
            if !(node > T::zero() && node <= horizon + snap) {
                return Err(invalid(format!("grid node {node} outside (0, {horizon}]")));
            }
            let idx = times.partition_point(|t| *t < node);
            let near = |i: usize| i < times.len() && (times[i] - node).abs() <= snap;
            if near(idx) {
                if idx > 0 {
                    times[idx] = node.min(horizon);
                }
            } else if idx > 0 && near(idx - 1) {
                if idx - 1 > 0 {
                    times[idx - 1] = node;
                }
            } else {
                times.insert(idx, node);
            }
        }
        Ok(Self {
            horizon,
            steps_per_year,
            times,
        })
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn steps_per_year(&self) -> usize {
        self.steps_per_year
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    /// Number of steps `K`; there are `K + 1` nodes.
    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn dt(&self, k: usize) -> T {
        self.times[k + 1] - self.times[k]
    }

    /// Node index of `t`, if `t` lies on the grid.
    pub fn index_of(&self, t: T) -> Option<usize> {
        let tol = T::lit(1e-9) * (T::one() + t.abs());
        let idx = self.times.partition_point(|x| *x < t - tol);
        (idx < self.times.len() && (self.times[idx] - t).abs() <= tol).then_some(idx)
    }

    pub fn contains(&self, t: T) -> bool {
        self.index_of(t).is_some()
    }
}

/// Which grid a batch of paths was simulated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mesh {
    Single,
    Fine,
    Coarse,
}

/// Fine grid for the first maturity, coarse grid for the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualMeshPlan<T: Real> {
    pub fine: TimeGrid<T>,
    pub coarse: Option<TimeGrid<T>>,
    /// `(maturity, mesh)` for every maturity, ascending.
    pub assignment: Vec<(T, Mesh)>,
}

impl<T: Real> DualMeshPlan<T> {
    /// The earliest maturity goes on the fine mesh, all later ones on the coarse mesh.
    pub fn new(maturities: &[T], n_fine: usize, n_coarse: usize) -> Result<Self> {
        if maturities.is_empty() {
            return Err(invalid("dual mesh needs at least one maturity"));
        }
        if n_fine < n_coarse {
            return Err(invalid(format!("fine steps ({n_fine}) below coarse steps ({n_coarse})")));
        }
        let mut sorted = maturities.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite maturity"));
        sorted.dedup();
        let first = sorted[0];
        let fine = TimeGrid::with_nodes(first, n_fine, &[first])?;
        let rest = &sorted[1..];
        let coarse = match rest.last() {
            Some(&last) => Some(TimeGrid::with_nodes(last, n_coarse, rest)?),
            None => None,
        };
        let mut assignment = vec![(first, Mesh::Fine)];
        assignment.extend(rest.iter().map(|&t| (t, Mesh::Coarse)));
        Ok(Self {
            fine,
            coarse,
            assignment,
        })
    }

    pub fn mesh_for(&self, maturity: T) -> Option<Mesh> {
        let tol = T::lit(1e-9);
        self.assignment
            .iter()
            .find(|(t, _)| (*t - maturity).abs() <= tol)
            .map(|(_, m)| *m)
    }

    pub fn grid(&self, mesh: Mesh) -> Option<&TimeGrid<T>> {
        match mesh {
            Mesh::Fine => Some(&self.fine),
            Mesh::Coarse => self.coarse.as_ref(),
            Mesh::Single => None,
        }
    }
}

/// A single grid or a fine/coarse pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimPlan<T: Real> {
    Single(TimeGrid<T>),
    Dual(DualMeshPlan<T>),
}

impl<T: Real> SimPlan<T> {
    /// Single grid reaching the last maturity with every maturity as a node.
    pub fn single_for(maturities: &[T], steps_per_year: usize) -> Result<Self> {
        let last = maturities
            .iter()
            .copied()
            .fold(None, |m: Option<T>, t| Some(m.map_or(t, |m| m.max(t))))
            .ok_or_else(|| invalid("no maturities"))?;
        Ok(Self::Single(TimeGrid::with_nodes(last, steps_per_year, maturities)?))
    }

    /// Mesh and grid a maturity is priced on.
    pub fn locate(&self, maturity: T) -> Option<(Mesh, &TimeGrid<T>)> {
        match self {
            SimPlan::Single(g) => g.contains(maturity).then_some((Mesh::Single, g)),
            SimPlan::Dual(p) => {
                let mesh = p.mesh_for(maturity)?;
                p.grid(mesh).map(|g| (mesh, g))
            }
        }
    }

    pub fn meshes(&self) -> Vec<(Mesh, &TimeGrid<T>)> {
        match self {
            SimPlan::Single(g) => vec![(Mesh::Single, g)],
            SimPlan::Dual(p) => {
                let mut v = vec![(Mesh::Fine, &p.fine)];
                if let Some(c) = &p.coarse {
                    v.push((Mesh::Coarse, c));
                }
                v
            }
        }
    }
}

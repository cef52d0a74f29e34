//! Periodic cubical cell complexes for the circle and the flat torus.

use crate::error::{Error, Result};

/// Smallest number of cells per axis.
pub const MIN_CELLS_PER_AXIS: usize = 8;

/// One cell of the complex.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    /// Barycenter in the fundamental domain.
    pub center: Vec<f64>,
    /// Length/area of the cell (1 for vertices).
    pub measure: f64,
    /// Measure of the dual cell (1 for top-dimensional cells).
    pub dual_measure: f64,
    /// Index into [`CellComplex::families`] for this degree.
    pub family: usize,
}

/// Signed incidence from `r`-cells to `(r+1)`-cells, stored by row.
#[derive(Clone, Debug, PartialEq)]
pub struct Incidence {
    pub n_rows: usize,
    pub n_cols: usize,
    /// `rows[τ]` lists the boundary `r`-cells of the `(r+1)`-cell `τ` with orientation signs.
    pub rows: Vec<Vec<(usize, i32)>>,
}

impl Incidence {
    /// Integer composition `next ∘ self`.
    pub fn compose(&self, next: &Incidence) -> Vec<Vec<(usize, i64)>> {
        next.rows
            .iter()
            .map(|row| {
                let mut acc: Vec<(usize, i64)> = Vec::new();
                for &(mid, a) in row {
                    for &(col, b) in &self.rows[mid] {
                        match acc.iter_mut().find(|(c, _)| *c == col) {
                            Some(entry) => entry.1 += (a * b) as i64,
                            None => acc.push((col, (a * b) as i64)),
                        }
                    }
                }
                acc.retain(|&(_, v)| v != 0);
                acc
            })
            .collect()
    }

    /// Column-wise view: for each `r`-cell, the `(r+1)`-cells containing it.
    pub fn transpose(&self) -> Vec<Vec<(usize, i32)>> {
        let mut cols = vec![Vec::new(); self.n_cols];
        for (row, entries) in self.rows.iter().enumerate() {
            for &(col, sign) in entries {
                cols[col].push((row, sign));
            }
        }
        cols
    }
}

/// Cells of one degree sharing an orientation; their barycenters form a
/// translated copy of the vertex lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct CellFamily {
    pub degree: usize,
    /// Zero-based axes spanned by the cells.
    pub axes: Vec<usize>,
    /// Barycenter of the cell at lattice position zero.
    pub offset: Vec<f64>,
    /// Index of that cell within its degree.
    pub base: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Manifold {
    Circle,
    Torus,
}

/// Periodic cubical complex with uniform spacing and the flat product metric.
#[derive(Clone, Debug)]
pub struct CellComplex {
    manifold: Manifold,
    periods: Vec<f64>,
    shape: Vec<usize>,
    cells: Vec<Vec<Cell>>,
    families: Vec<Vec<CellFamily>>,
    incidence: Vec<Incidence>,
}

fn check_axis(n: usize, length: f64) -> Result<()> {
    if n < MIN_CELLS_PER_AXIS {
        return Err(Error::Config(format!(
            "need at least {MIN_CELLS_PER_AXIS} cells per axis, got {n}"
        )));
    }
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::Config(format!("period length must be positive, got {length}")));
    }
    Ok(())
}

/// Uniform periodic subdivision of a circle of circumference `length`.
pub fn build_circle_complex(n_cells: usize, length: f64) -> Result<CellComplex> {
    check_axis(n_cells, length)?;
    let h = length / n_cells as f64;
    let vertices = (0..n_cells)
        .map(|i| Cell { center: vec![i as f64 * h], measure: 1.0, dual_measure: h, family: 0 })
        .collect();
    let edges = (0..n_cells)
        .map(|i| Cell { center: vec![(i as f64 + 0.5) * h], measure: h, dual_measure: 1.0, family: 0 })
        .collect();
    let d0 = Incidence {
        n_rows: n_cells,
        n_cols: n_cells,
        rows: (0..n_cells).map(|i| vec![(i, -1), ((i + 1) % n_cells, 1)]).collect(),
    };
    Ok(CellComplex {
        manifold: Manifold::Circle,
        periods: vec![length],
        shape: vec![n_cells],
        cells: vec![vertices, edges],
        families: vec![
            vec![CellFamily { degree: 0, axes: vec![], offset: vec![0.0], base: 0 }],
            vec![CellFamily { degree: 1, axes: vec![0], offset: vec![0.5 * h], base: 0 }],
        ],
        incidence: vec![d0],
    })
}

/// Uniform `nx × ny` periodic grid on the torus `[0, lx) × [0, ly)`.
///
/// Edges are numbered with all x-aligned edges first, then all y-aligned ones.
pub fn build_torus_complex(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<CellComplex> {
    check_axis(nx, lx)?;
    check_axis(ny, ly)?;
    let (hx, hy) = (lx / nx as f64, ly / ny as f64);
    let nv = nx * ny;
    let v = |i: usize, j: usize| (i % nx) + nx * (j % ny);

    let mut vertices = Vec::with_capacity(nv);
    let mut edges = vec![
        Cell { center: vec![], measure: 0.0, dual_measure: 0.0, family: 0 };
        2 * nv
    ];
    let mut faces = Vec::with_capacity(nv);
    let mut d0 = vec![Vec::new(); 2 * nv];
    let mut d1 = Vec::with_capacity(nv);
    for j in 0..ny {
        for i in 0..nx {
            let (x, y) = (i as f64 * hx, j as f64 * hy);
            vertices.push(Cell { center: vec![x, y], measure: 1.0, dual_measure: hx * hy, family: 0 });
            let ex = v(i, j);
            let ey = nv + v(i, j);
            edges[ex] = Cell { center: vec![x + 0.5 * hx, y], measure: hx, dual_measure: hy, family: 0 };
            edges[ey] = Cell { center: vec![x, y + 0.5 * hy], measure: hy, dual_measure: hx, family: 1 };
            d0[ex] = vec![(v(i, j), -1), (v(i + 1, j), 1)];
            d0[ey] = vec![(v(i, j), -1), (v(i, j + 1), 1)];
            faces.push(Cell {
                center: vec![x + 0.5 * hx, y + 0.5 * hy],
                measure: hx * hy,
                dual_measure: 1.0,
                family: 0,
            });
            d1.push(vec![(v(i, j), 1), (nv + v(i + 1, j), 1), (v(i, j + 1), -1), (nv + v(i, j), -1)]);
        }
    }
    Ok(CellComplex {
        manifold: Manifold::Torus,
        periods: vec![lx, ly],
        shape: vec![nx, ny],
        cells: vec![vertices, edges, faces],
        families: vec![
            vec![CellFamily { degree: 0, axes: vec![], offset: vec![0.0, 0.0], base: 0 }],
            vec![
                CellFamily { degree: 1, axes: vec![0], offset: vec![0.5 * hx, 0.0], base: 0 },
                CellFamily { degree: 1, axes: vec![1], offset: vec![0.0, 0.5 * hy], base: nv },
            ],
            vec![CellFamily { degree: 2, axes: vec![0, 1], offset: vec![0.5 * hx, 0.5 * hy], base: 0 }],
        ],
        incidence: vec![
            Incidence { n_rows: 2 * nv, n_cols: nv, rows: d0 },
            Incidence { n_rows: nv, n_cols: 2 * nv, rows: d1 },
        ],
    })
}

impl CellComplex {
    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn dim(&self) -> usize {
        self.periods.len()
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    /// Cells per axis.
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Grid spacing per axis.
    pub fn spacing(&self) -> Vec<f64> {
        self.periods.iter().zip(&self.shape).map(|(l, &n)| l / n as f64).collect()
    }

    /// Largest grid spacing.
    pub fn max_spacing(&self) -> f64 {
        self.spacing().into_iter().fold(0.0, f64::max)
    }

    pub fn cells(&self, degree: usize) -> &[Cell] {
        &self.cells[degree]
    }

    pub fn count(&self, degree: usize) -> usize {
        self.cells[degree].len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.cells.iter().map(Vec::len).collect()
    }

    /// `V - E (+ F)`.
    pub fn euler_characteristic(&self) -> i64 {
        self.counts()
            .iter()
            .enumerate()
            .map(|(r, &c)| if r % 2 == 0 { c as i64 } else { -(c as i64) })
            .sum()
    }

    /// Incidence from degree `r` to `r + 1`.
    pub fn incidence(&self, r: usize) -> Result<&Incidence> {
        self.incidence.get(r).ok_or(Error::Degree { degree: r, dim: self.dim() })
    }

    pub fn families(&self, degree: usize) -> &[CellFamily] {
        &self.families[degree]
    }

    pub fn family_of(&self, degree: usize, cell: usize) -> &CellFamily {
        &self.families[degree][self.cells[degree][cell].family]
    }

    /// Cell of `family` at integer lattice position `pos` (wrapped periodically).
    pub fn lattice_cell(&self, family: &CellFamily, pos: &[i64]) -> usize {
        let mut index = 0;
        let mut stride = 1;
        for (axis, &p) in pos.iter().enumerate() {
            let n = self.shape[axis] as i64;
            index += p.rem_euclid(n) as usize * stride;
            stride *= n as usize;
        }
        family.base + index
    }

    /// Periodic displacement `a - b` reduced to the symmetric fundamental domain.
    pub fn displacement(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter()
            .zip(b)
            .zip(&self.periods)
            .map(|((x, y), l)| {
                let d = (x - y).rem_euclid(*l);
                if d > 0.5 * l {
                    d - l
                } else {
                    d
                }
            })
            .collect()
    }

    /// Periodic Euclidean distance.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.displacement(a, b).iter().map(|d| d * d).sum::<f64>().sqrt()
    }

    /// Short description used in experiment manifests.
    pub fn descriptor(&self) -> String {
        let name = match self.manifold {
            Manifold::Circle => "circle",
            Manifold::Torus => "torus",
        };
        let shape = self.shape.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("x");
        let periods = self.periods.iter().map(|p| format!("{p}")).collect::<Vec<_>>().join("x");
        format!("{name}:{shape}:L={periods}")
    }
}

/// Rank of an incidence matrix over the prime field `F_p`, `p = 2^61 - 1`.
///
/// Used as an exact oracle for Betti numbers: the complexes here are torsion
/// free, so the rank over `F_p` agrees with the rank over `ℚ`.
pub fn incidence_rank(incidence: &Incidence) -> usize {
    const P: u64 = (1 << 61) - 1;
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % P as u128) as u64;
    let powmod = |mut a: u64, mut e: u64| {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = mulmod(acc, a);
            }
            a = mulmod(a, a);
            e >>= 1;
        }
        acc
    };
    let to_field = |v: i32| if v >= 0 { v as u64 } else { P - (-v) as u64 };

    // Column reduction keyed by the largest nonzero index.
    let mut pivots: std::collections::HashMap<usize, Vec<(usize, u64)>> = Default::default();
    let mut rank = 0;
    for row in &incidence.rows {
        let mut vec: std::collections::BTreeMap<usize, u64> =
            row.iter().filter(|(_, v)| *v != 0).map(|&(c, v)| (c, to_field(v))).collect();
        while let Some((&low, &value)) = vec.iter().next_back() {
            match pivots.get(&low) {
                Some(pivot) => {
                    let pivot_low = pivot.last().unwrap().1;
                    let factor = mulmod(value, powmod(pivot_low, P - 2));
                    for &(c, pv) in pivot {
                        let sub = mulmod(factor, pv);
                        let entry = vec.entry(c).or_insert(0);
                        *entry = (*entry + P - sub) % P;
                        if *entry == 0 {
                            vec.remove(&c);
                        }
                    }
                }
                None => {
                    pivots.insert(low, vec.into_iter().collect());
                    rank += 1;
                    break;
                }
            }
        }
    }
    rank
}

/// Betti numbers from incidence ranks: `b_r = n_r - rank d_r - rank d_{r-1}`.
pub fn betti_from_ranks(complex: &CellComplex) -> Vec<usize> {
    let ranks: Vec<usize> = (0..complex.dim()).map(|r| incidence_rank(&complex.incidence[r])).collect();
    (0..=complex.dim())
        .map(|r| {
            let up = ranks.get(r).copied().unwrap_or(0);
            let down = if r > 0 { ranks[r - 1] } else { 0 };
            complex.count(r) - up - down
        })
        .collect()
}

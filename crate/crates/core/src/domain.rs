//! Discrete symmetric domains and exact grid-to-grid reflection maps.
//!
//! A domain is a uniform grid whose interior mask is symmetric about the
//! hyperplane `x1 = 0` and convex along every grid line parallel to the
//! x1-axis. Reflection planes are restricted to half-grid multiples
//! `lambda = k*h/2`, which makes every reflection an exact node-to-node
//! permutation: no interpolation enters the reflection machinery.

use std::sync::{Arc, OnceLock};

use crate::error::{CoreError, Result};

const EXTERIOR: usize = usize::MAX;

/// Result of reflecting a grid node about the plane `x1 = lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reflected {
    /// The image is a grid node; `in_interior` tells whether it lies in the
    /// open domain (true) or on/outside the boundary (false).
    Node { node: usize, in_interior: bool },
    /// The image falls outside the stored grid entirely.
    OffGrid,
}

/// A discretized x1-symmetric, x1-convex open set with Dirichlet mask.
///
/// Immutable after construction; component caches for every half-grid
/// reflection plane are populated eagerly so the structure can be shared
/// freely between threads.
#[derive(Debug)]
pub struct Domain {
    dim: usize,
    h: f64,
    ell: f64,
    nx: usize,
    ny: usize,
    x1: Vec<f64>,
    x2: Vec<f64>,
    mask: Vec<bool>,
    interior_of_node: Vec<usize>,
    node_of_interior: Vec<usize>,
    /// lambda = k*h/2 for k in 0..=half_steps; half_steps*h/2 == ell.
    half_steps: usize,
    /// Component counts of {x in interior : x1 > k*h/2} for k in
    /// 0..half_steps, established at construction.
    component_counts: Vec<usize>,
    /// Component node lists, materialized on first use per plane.
    component_lists: Vec<OnceLock<Vec<Vec<usize>>>>,
    /// Per-row half extents in cells when built from rows (2-D only).
    row_half_cells: Option<Vec<usize>>,
}

impl PartialEq for Domain {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.h.to_bits() == other.h.to_bits()
            && self.ell.to_bits() == other.ell.to_bits()
            && self.nx == other.nx
            && self.ny == other.ny
            && self.mask == other.mask
    }
}

impl Domain {
    /// Build the 1-D interval (-half_length, half_length) with `n_cells`
    /// uniform cells. `n_cells` must be even and at least 8 so the grid has
    /// a node at x1 = 0 and every half-grid reflection is exact.
    pub fn build_interval(half_length: f64, n_cells: usize) -> Result<Arc<Domain>> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "half_length must be positive and finite, got {half_length}"
            )));
        }
        if n_cells < 8 {
            return Err(CoreError::InvalidParameter(format!(
                "n_cells must be at least 8, got {n_cells}"
            )));
        }
        if !n_cells.is_multiple_of(2) {
            return Err(CoreError::InvalidParameter(format!(
                "n_cells must be even for exact half-grid reflection, got {n_cells}"
            )));
        }
        let h = 2.0 * half_length / n_cells as f64;
        let nx = n_cells + 1;
        let mut mask = vec![false; nx];
        for (c, m) in mask.iter_mut().enumerate() {
            *m = c >= 1 && c < n_cells;
        }
        Domain::assemble(1, h, half_length, nx, 1, mask, None)
    }

    /// Build a 2-D union-of-cells domain from per-row cell masks.
    ///
    /// Each entry of `rows` describes one horizontal strip of height `h`:
    /// `rows[i][j]` is true when the cell spanning
    /// `[(j - w/2) h, (j - w/2 + 1) h] x [i h, (i+1) h]` belongs to the
    /// domain, where `w` is the (even) common row length. Every row must be
    /// a single symmetric run of cells.
    pub fn build_symmetric_2d(h: f64, rows: &[Vec<bool>]) -> Result<Arc<Domain>> {
        if !(h.is_finite() && h > 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "h must be positive and finite, got {h}"
            )));
        }
        if rows.len() < 2 {
            return Err(CoreError::InvalidDomain(
                "need at least 2 cell rows to enclose an interior node line".into(),
            ));
        }
        let width = rows[0].len();
        if width == 0 || !width.is_multiple_of(2) {
            return Err(CoreError::InvalidDomain(format!(
                "row width must be even and positive, got {width}"
            )));
        }
        let mut half_cells = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(CoreError::InvalidDomain(format!(
                    "row {i} has length {} but row 0 has length {width}",
                    row.len()
                )));
            }
            let count = row.iter().filter(|&&c| c).count();
            if count == 0 {
                // An empty strip severs the union of cells.
                return Err(CoreError::DisconnectedDomain);
            }
            // single contiguous run
            let first = row.iter().position(|&c| c).unwrap();
            let last = row.iter().rposition(|&c| c).unwrap();
            if last - first + 1 != count {
                return Err(CoreError::ConvexityViolated { row: i });
            }
            // symmetric about the center line: cell j mirrors to width-1-j
            for j in 0..width {
                if row[j] != row[width - 1 - j] {
                    return Err(CoreError::AsymmetricRow { row: i });
                }
            }
            half_cells.push(count / 2);
        }
        let m_max = *half_cells.iter().max().unwrap();
        let ell = m_max as f64 * h;
        // Node grid: columns 0..=width (x1 from -w/2*h to w/2*h), lines 0..=rows.
        let nx = width + 1;
        let ny = rows.len() + 1;
        let mut mask = vec![false; nx * ny];
        // A node is interior iff all four surrounding cells are present.
        for line in 1..ny - 1 {
            for col in 1..nx - 1 {
                let below = &rows[line - 1];
                let above = &rows[line];
                if below[col - 1] && below[col] && above[col - 1] && above[col] {
                    mask[line * nx + col] = true;
                }
            }
        }
        Domain::assemble(2, h, ell, nx, ny, mask, Some(half_cells))
    }

    /// Convenience: convert per-row half extents (in cells) to row masks.
    pub fn rows_from_half_cells(half_cells: &[usize]) -> Vec<Vec<bool>> {
        let m_max = half_cells.iter().copied().max().unwrap_or(0).max(1);
        half_cells
            .iter()
            .map(|&m| {
                let mut row = vec![false; 2 * m_max];
                for j in (m_max - m)..(m_max + m) {
                    row[j] = true;
                }
                row
            })
            .collect()
    }

    fn assemble(
        dim: usize,
        h: f64,
        ell: f64,
        nx: usize,
        ny: usize,
        mask: Vec<bool>,
        row_half_cells: Option<Vec<usize>>,
    ) -> Result<Arc<Domain>> {
        debug_assert!(nx % 2 == 1, "grid must have a node column at x1 = 0");
        let c0 = (nx - 1) / 2;
        let x1: Vec<f64> = (0..nx).map(|c| (c as i64 - c0 as i64) as f64 * h).collect();
        let x2: Vec<f64> = (0..ny).map(|l| l as f64 * h).collect();

        let mut interior_of_node = vec![EXTERIOR; nx * ny];
        let mut node_of_interior = Vec::new();
        for (node, &m) in mask.iter().enumerate() {
            if m {
                interior_of_node[node] = node_of_interior.len();
                node_of_interior.push(node);
            }
        }
        if node_of_interior.is_empty() {
            return Err(CoreError::InvalidDomain("domain has no interior nodes".into()));
        }

        let half_steps = if dim == 1 {
            nx - 1
        } else {
            2 * row_half_cells.as_ref().unwrap().iter().copied().max().unwrap()
        };

        let mut dom = Domain {
            dim,
            h,
            ell,
            nx,
            ny,
            x1,
            x2,
            mask,
            interior_of_node,
            node_of_interior,
            half_steps,
            component_counts: Vec::new(),
            component_lists: Vec::new(),
            row_half_cells,
        };
        dom.validate_mask()?;
        dom.component_counts = (0..dom.half_steps).map(|k| dom.count_components(k)).collect();
        dom.component_lists = (0..dom.half_steps).map(|_| OnceLock::new()).collect();
        Ok(Arc::new(dom))
    }

    /// Component count of the cap at half-grid index k. In 1-D the cap of a
    /// convex interval is a single run, so only occupancy matters; in 2-D a
    /// flood fill does the counting.
    fn count_components(&self, k: usize) -> usize {
        if self.dim == 1 {
            // rightmost interior column is nx - 2
            let c0 = (self.nx - 1) as i64 / 2;
            usize::from(2 * ((self.nx - 2) as i64 - c0) > k as i64)
        } else {
            self.flood_components(k).len()
        }
    }

    fn validate_mask(&self) -> Result<()> {
        // Symmetry of the interior mask about x1 = 0.
        for line in 0..self.ny {
            for col in 0..self.nx {
                let mirrored = self.nx - 1 - col;
                if self.mask[line * self.nx + col] != self.mask[line * self.nx + mirrored] {
                    return Err(CoreError::AsymmetricRow { row: line });
                }
            }
        }
        // Convexity: one contiguous run of interior nodes per grid line.
        for line in 0..self.ny {
            let cells = &self.mask[line * self.nx..(line + 1) * self.nx];
            let count = cells.iter().filter(|&&c| c).count();
            if count == 0 {
                continue;
            }
            let first = cells.iter().position(|&c| c).unwrap();
            let last = cells.iter().rposition(|&c| c).unwrap();
            if last - first + 1 != count {
                return Err(CoreError::ConvexityViolated { row: line });
            }
        }
        // Connectivity of the whole interior.
        let all = self.flood_components_of(|_| true);
        if all.len() != 1 {
            return Err(CoreError::DisconnectedDomain);
        }
        Ok(())
    }

    /// Connected components (4-adjacency) of {interior nodes : x1 > k*h/2}.
    fn flood_components(&self, k: usize) -> Vec<Vec<usize>> {
        let c0 = (self.nx - 1) / 2;
        // x1 > k*h/2  <=>  2*(col - c0) > k, exact in integer arithmetic.
        self.flood_components_of(|node| {
            let col = node % self.nx;
            2 * (col as i64 - c0 as i64) > k as i64
        })
    }

    fn flood_components_of(&self, include: impl Fn(usize) -> bool) -> Vec<Vec<usize>> {
        let n = self.interior_count();
        let mut seen = vec![false; n];
        let mut comps = Vec::new();
        for start in 0..n {
            if seen[start] || !include(self.node_of_interior[start]) {
                continue;
            }
            let mut comp = Vec::new();
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                comp.push(i);
                for j in self.neighbor_interiors(self.node_of_interior[i]).into_iter().flatten() {
                    if !seen[j] && include(self.node_of_interior[j]) {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps.sort_by_key(|c| c[0]);
        comps
    }

    /// Interior indices of the 2*dim grid neighbors of `node` (None when a
    /// neighbor is a boundary/exterior node).
    pub(crate) fn neighbor_interiors(&self, node: usize) -> [Option<usize>; 4] {
        let col = node % self.nx;
        let line = node / self.nx;
        let mut out = [None; 4];
        if col > 0 {
            out[0] = self.interior_index(node - 1);
        }
        if col + 1 < self.nx {
            out[1] = self.interior_index(node + 1);
        }
        if self.dim == 2 {
            if line > 0 {
                out[2] = self.interior_index(node - self.nx);
            }
            if line + 1 < self.ny {
                out[3] = self.interior_index(node + self.nx);
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn spacing(&self) -> f64 {
        self.h
    }
    pub fn half_extent(&self) -> f64 {
        self.ell
    }
    pub fn grid_shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }
    pub fn interior_count(&self) -> usize {
        self.node_of_interior.len()
    }
    pub fn row_half_cells(&self) -> Option<&[usize]> {
        self.row_half_cells.as_deref()
    }

    /// Number of half-grid steps: lambda = k*h/2 is admissible for k in 0..=K.
    pub fn half_steps(&self) -> usize {
        self.half_steps
    }

    /// Value of the k-th half-grid reflection plane.
    pub fn lambda_value(&self, k: usize) -> f64 {
        k as f64 * (self.h * 0.5)
    }

    /// Map a raw plane position onto the half-grid, rejecting values that
    /// are not (within 1e-9 relative) an exact half-grid multiple.
    pub fn half_grid_index(&self, lambda: f64) -> Result<usize> {
        let h2 = self.h * 0.5;
        let kf = lambda / h2;
        let k = kf.round();
        if (kf - k).abs() > 1e-9 * (1.0 + kf.abs()) || k < 0.0 {
            return Err(CoreError::NotOnHalfGrid { lambda, half_step: h2 });
        }
        let k = k as usize;
        if k > self.half_steps {
            return Err(CoreError::LambdaOutOfRange {
                k: k as i64,
                max: self.half_steps,
            });
        }
        Ok(k)
    }

    pub fn is_interior(&self, node: usize) -> bool {
        self.mask.get(node).copied().unwrap_or(false)
    }

    pub fn interior_index(&self, node: usize) -> Option<usize> {
        match self.interior_of_node.get(node) {
            Some(&i) if i != EXTERIOR => Some(i),
            _ => None,
        }
    }

    pub fn node_of_interior(&self, i: usize) -> usize {
        self.node_of_interior[i]
    }

    /// Coordinates of a grid node; x2 is 0 for 1-D domains.
    pub fn node_coords(&self, node: usize) -> [f64; 2] {
        let col = node % self.nx;
        let line = node / self.nx;
        [self.x1[col], if self.dim == 2 { self.x2[line] } else { 0.0 }]
    }

    /// x1 coordinate of an interior node.
    pub fn interior_x1(&self, i: usize) -> f64 {
        self.x1[self.node_of_interior[i] % self.nx]
    }

    /// True when the interior node's x1 exceeds k*h/2 (exact integer test).
    pub fn interior_beyond(&self, i: usize, k: usize) -> bool {
        let col = self.node_of_interior[i] % self.nx;
        let c0 = (self.nx - 1) / 2;
        2 * (col as i64 - c0 as i64) > k as i64
    }

    /// Reflect a grid node about the plane `x1 = lambda` with lambda = k*h/2.
    /// The image coordinate is produced by exact index arithmetic.
    pub fn reflect_node(&self, k: usize, node: usize) -> Reflected {
        let col = node % self.nx;
        let line = node / self.nx;
        let c0 = (self.nx - 1) as i64 / 2;
        let target = k as i64 + 2 * c0 - col as i64;
        if target < 0 || target >= self.nx as i64 {
            return Reflected::OffGrid;
        }
        let image = line * self.nx + target as usize;
        Reflected::Node {
            node: image,
            in_interior: self.mask[image],
        }
    }

    /// Reflect about a raw plane position, validating the half-grid
    /// restriction first.
    pub fn reflect(&self, lambda: f64, node: usize) -> Result<Reflected> {
        let k = self.half_grid_index(lambda)?;
        Ok(self.reflect_node(k, node))
    }

    /// Connected components of {x in interior : x1 > lambda} for a half-grid
    /// lambda in [0, ell). Served from the cache.
    pub fn omega_lambda_components(&self, lambda: f64) -> Result<&[Vec<usize>]> {
        let k = self.half_grid_index(lambda)?;
        if k >= self.half_steps {
            return Err(CoreError::LambdaOutOfRange {
                k: k as i64,
                max: self.half_steps.saturating_sub(1),
            });
        }
        Ok(self.components_at(k))
    }

    /// Cached component list by half-grid index (k*h/2 < ell). Materialized
    /// on first use, then shared.
    pub fn components_at(&self, k: usize) -> &[Vec<usize>] {
        let lists = self.component_lists[k].get_or_init(|| self.flood_components(k));
        debug_assert_eq!(lists.len(), self.component_counts[k]);
        lists
    }

    /// Number of connected components of Omega_lambda at half-grid index k,
    /// counted at construction time.
    pub fn component_count(&self, k: usize) -> usize {
        self.component_counts[k]
    }

    /// Interior index of the mirror node about x1 = 0. Total because the
    /// mask is symmetric.
    pub fn mirror_interior(&self, i: usize) -> usize {
        match self.reflect_node(0, self.node_of_interior[i]) {
            Reflected::Node { node, in_interior } => {
                debug_assert!(in_interior);
                self.interior_index(node).expect("mask is symmetric")
            }
            Reflected::OffGrid => unreachable!("mirror of a grid node stays on the grid"),
        }
    }

    /// Serialize to the structured text document. The float fields use
    /// shortest round-trip decimals, so parsing recovers them bit-exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("parasym-domain v1\n");
        out.push_str(&format!("dim {}\n", self.dim));
        out.push_str(&format!("h {:?}\n", self.h));
        out.push_str(&format!("ell {:?}\n", self.ell));
        out.push_str(&format!("nx {}\n", self.nx));
        out.push_str(&format!("ny {}\n", self.ny));
        if let Some(rows) = &self.row_half_cells {
            let words: Vec<String> = rows.iter().map(|m| m.to_string()).collect();
            out.push_str(&format!("rows {}\n", words.join(" ")));
        }
        // Run-length encoding of the flat mask: first value, then run lengths.
        let first = self.mask[0];
        let mut runs = Vec::new();
        let mut current = first;
        let mut len = 0usize;
        for &m in &self.mask {
            if m == current {
                len += 1;
            } else {
                runs.push(len);
                current = m;
                len = 1;
            }
        }
        runs.push(len);
        let words: Vec<String> = runs.iter().map(|r| r.to_string()).collect();
        out.push_str(&format!(
            "mask {} {}\n",
            if first { 1 } else { 0 },
            words.join(" ")
        ));
        out
    }

    /// Parse the structured text document produced by [`Domain::to_text`].
    /// All construction-time invariants are re-validated.
    pub fn from_text(text: &str) -> Result<Arc<Domain>> {
        let mut dim = None;
        let mut h = None;
        let mut ell = None;
        let mut nx = None;
        let mut ny = None;
        let mut rows: Option<Vec<usize>> = None;
        let mut mask: Option<Vec<bool>> = None;

        let mut lines = text.lines();
        match lines.next() {
            Some("parasym-domain v1") => {}
            other => {
                return Err(CoreError::MalformedFile(format!(
                    "bad header line: {other:?}"
                )))
            }
        }
        for (lineno, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut words = line.split_whitespace();
            let key = words.next().unwrap();
            let err = |what: &str| {
                CoreError::MalformedFile(format!("line {}: {what}", lineno + 2))
            };
            match key {
                "dim" => dim = Some(parse_next::<usize>(&mut words).ok_or_else(|| err("dim"))?),
                "h" => h = Some(parse_next::<f64>(&mut words).ok_or_else(|| err("h"))?),
                "ell" => ell = Some(parse_next::<f64>(&mut words).ok_or_else(|| err("ell"))?),
                "nx" => nx = Some(parse_next::<usize>(&mut words).ok_or_else(|| err("nx"))?),
                "ny" => ny = Some(parse_next::<usize>(&mut words).ok_or_else(|| err("ny"))?),
                "rows" => {
                    let parsed: Option<Vec<usize>> = words.map(|w| w.parse().ok()).collect();
                    rows = Some(parsed.ok_or_else(|| err("rows"))?);
                }
                "mask" => {
                    let first = match words.next() {
                        Some("0") => false,
                        Some("1") => true,
                        _ => return Err(err("mask first value")),
                    };
                    let runs: Option<Vec<usize>> = words.map(|w| w.parse().ok()).collect();
                    let runs = runs.ok_or_else(|| err("mask runs"))?;
                    let mut flat = Vec::new();
                    let mut value = first;
                    for run in runs {
                        flat.extend(std::iter::repeat_n(value, run));
                        value = !value;
                    }
                    mask = Some(flat);
                }
                other => {
                    return Err(CoreError::MalformedFile(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 2
                    )))
                }
            }
        }
        let dim = dim.ok_or_else(|| CoreError::MalformedFile("missing dim".into()))?;
        let h = h.ok_or_else(|| CoreError::MalformedFile("missing h".into()))?;
        let ell = ell.ok_or_else(|| CoreError::MalformedFile("missing ell".into()))?;
        let nx = nx.ok_or_else(|| CoreError::MalformedFile("missing nx".into()))?;
        let ny = ny.ok_or_else(|| CoreError::MalformedFile("missing ny".into()))?;
        let mask = mask.ok_or_else(|| CoreError::MalformedFile("missing mask".into()))?;
        if mask.len() != nx * ny {
            return Err(CoreError::MalformedFile(format!(
                "mask has {} entries, expected {}",
                mask.len(),
                nx * ny
            )));
        }
        if dim == 1 && ny != 1 {
            return Err(CoreError::MalformedFile("1-D domain must have ny = 1".into()));
        }
        Domain::assemble(dim, h, ell, nx, ny, mask, rows)
    }
}

fn parse_next<T: std::str::FromStr>(words: &mut std::str::SplitWhitespace) -> Option<T> {
    words.next()?.parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn interval_matches_worked_dimensions() {
        let d = Domain::build_interval(3.0 * PI, 1024).unwrap();
        assert_eq!(d.dim(), 1);
        assert!((d.half_extent() - 3.0 * PI).abs() < 1e-15);
        assert!((d.spacing() - 6.0 * PI / 1024.0).abs() < 1e-15);
        assert_eq!(d.interior_count(), 1023);
        assert_eq!(d.half_steps(), 1024);
    }

    #[test]
    fn smallest_interval_has_seven_interior_nodes() {
        let d = Domain::build_interval(1.0, 8).unwrap();
        assert_eq!(d.interior_count(), 7);
        let mut coords: Vec<f64> = (0..7).map(|i| d.interior_x1(i)).collect();
        coords.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (i, &x) in coords.iter().enumerate() {
            assert!((x - (i as f64 - 3.0) * 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn odd_cell_count_is_rejected() {
        assert!(matches!(
            Domain::build_interval(1.0, 9),
            Err(CoreError::InvalidParameter(_))
        ));
        assert!(matches!(
            Domain::build_interval(1.0, 4),
            Err(CoreError::InvalidParameter(_))
        ));
    }

    #[test]
    fn rectangle_rows_have_expected_extent() {
        let rows = Domain::rows_from_half_cells(&[4, 4, 4, 4]);
        let d = Domain::build_symmetric_2d(0.5, &rows).unwrap();
        assert_eq!(d.dim(), 2);
        assert!((d.half_extent() - 2.0).abs() < 1e-15);
        // 7 interior columns x 3 interior lines
        assert_eq!(d.interior_count(), 21);
        for k in 0..d.half_steps() {
            assert!(d.component_count(k) <= 1, "rectangle tail must be connected");
        }
        // interior nodes reach x1 = ell - h, so caps below that are occupied
        for k in 0..d.half_steps() - 2 {
            assert_eq!(d.component_count(k), 1);
        }
    }

    /// Independent flood-fill oracle over an explicit cell grid, used to
    /// cross-check the cached component counts of the dumbbell domain.
    fn oracle_component_count(rows: &[Vec<bool>], k: usize) -> usize {
        let width = rows[0].len();
        let nx = width + 1;
        let ny = rows.len() + 1;
        let c0 = (nx - 1) / 2;
        let node_in = |col: usize, line: usize| -> bool {
            line >= 1
                && line < ny - 1
                && col >= 1
                && col < nx - 1
                && rows[line - 1][col - 1]
                && rows[line - 1][col]
                && rows[line][col - 1]
                && rows[line][col]
                && 2 * (col as i64 - c0 as i64) > k as i64
        };
        let mut seen = vec![false; nx * ny];
        let mut count = 0;
        for line in 0..ny {
            for col in 0..nx {
                if !node_in(col, line) || seen[line * nx + col] {
                    continue;
                }
                count += 1;
                let mut stack = vec![(col, line)];
                seen[line * nx + col] = true;
                while let Some((c, l)) = stack.pop() {
                    let mut push = |c2: usize, l2: usize| {
                        if node_in(c2, l2) && !seen[l2 * nx + c2] {
                            seen[l2 * nx + c2] = true;
                            stack.push((c2, l2));
                        }
                    };
                    if c > 0 {
                        push(c - 1, l);
                    }
                    push(c + 1, l);
                    if l > 0 {
                        push(c, l - 1);
                    }
                    push(c, l + 1);
                }
            }
        }
        count
    }

    #[test]
    fn dumbbell_component_counts_match_flood_fill_oracle() {
        let half_cells = [5usize, 5, 1, 1, 5, 5];
        let rows = Domain::rows_from_half_cells(&half_cells);
        let d = Domain::build_symmetric_2d(0.25, &rows).unwrap();
        for k in 0..d.half_steps() {
            assert_eq!(
                d.component_count(k),
                oracle_component_count(&rows, k),
                "component count mismatch at k = {k}"
            );
        }
        // Past the neck the tail splits into two lobes.
        assert_eq!(d.component_count(2), 2);
    }

    #[test]
    fn row_gap_violates_convexity() {
        let mut rows = Domain::rows_from_half_cells(&[3, 3, 3]);
        rows[1][2] = false;
        rows[1][3] = false; // keep symmetry, make a gap
        assert!(matches!(
            Domain::build_symmetric_2d(0.5, &rows),
            Err(CoreError::ConvexityViolated { row: 1 })
        ));
    }

    #[test]
    fn asymmetric_row_is_rejected() {
        let mut rows = Domain::rows_from_half_cells(&[3, 2, 3]);
        rows[1][0] = true; // widen the narrow row on the left only
        assert!(matches!(
            Domain::build_symmetric_2d(0.5, &rows),
            Err(CoreError::AsymmetricRow { row: 1 })
        ));
    }

    #[test]
    fn empty_row_disconnects() {
        let mut rows = Domain::rows_from_half_cells(&[3, 3, 3, 3]);
        rows[1].iter_mut().for_each(|c| *c = false);
        assert!(matches!(
            Domain::build_symmetric_2d(0.5, &rows),
            Err(CoreError::DisconnectedDomain)
        ));
    }

    #[test]
    fn reflect_about_zero_mirrors_coordinates() {
        let d = Domain::build_interval(1.0, 8).unwrap();
        for i in 0..d.interior_count() {
            let node = d.node_of_interior(i);
            match d.reflect_node(0, node) {
                Reflected::Node { node: m, in_interior } => {
                    assert!(in_interior);
                    assert!((d.node_coords(m)[0] + d.node_coords(node)[0]).abs() < 1e-15);
                }
                Reflected::OffGrid => panic!("mirror fell off grid"),
            }
        }
    }

    #[test]
    fn reflect_arithmetic_example() {
        // h = 1/4, lambda = 1/8 (k = 1): 2*lambda - x1 maps 1/2 to -1/4
        let d = Domain::build_interval(1.0, 8).unwrap();
        let node = (0..d.interior_count())
            .map(|i| d.node_of_interior(i))
            .find(|&n| (d.node_coords(n)[0] - 0.5).abs() < 1e-15)
            .unwrap();
        match d.reflect(0.125, node).unwrap() {
            Reflected::Node { node: m, in_interior } => {
                assert!((d.node_coords(m)[0] + 0.25).abs() < 1e-15);
                assert!(in_interior);
            }
            Reflected::OffGrid => panic!(),
        }
    }

    #[test]
    fn reflect_rejects_off_half_grid_lambda() {
        let d = Domain::build_interval(1.0, 8).unwrap();
        let node = d.node_of_interior(0);
        assert!(matches!(
            d.reflect(0.1, node),
            Err(CoreError::NotOnHalfGrid { .. })
        ));
    }

    #[test]
    fn omega_ell_is_vacuous() {
        // lambda = ell - h/2: no interior node lies beyond it.
        let d = Domain::build_interval(1.0, 8).unwrap();
        let k = d.half_steps() - 1;
        assert!(d.components_at(k).is_empty());
        // and lambda = ell itself is out of cache range
        let ell = d.half_extent();
        assert!(d.omega_lambda_components(ell).is_err());
    }

    #[test]
    fn interval_tails_are_single_components() {
        let d = Domain::build_interval(2.0, 16).unwrap();
        for k in 0..d.half_steps() {
            let comps = d.components_at(k);
            assert!(comps.len() <= 1);
        }
        assert_eq!(d.component_count(0), 1);
    }

    #[test]
    fn involution_and_component_nesting() {
        let rows = Domain::rows_from_half_cells(&[5, 5, 1, 1, 5, 5]);
        let d = Domain::build_symmetric_2d(0.25, &rows).unwrap();
        // Reflection twice about the same plane is the identity.
        for k in (0..d.half_steps()).step_by(3) {
            for i in 0..d.interior_count() {
                let node = d.node_of_interior(i);
                if let Reflected::Node { node: m, .. } = d.reflect_node(k, node) {
                    match d.reflect_node(k, m) {
                        Reflected::Node { node: back, .. } => assert_eq!(back, node),
                        Reflected::OffGrid => panic!("involution left the grid"),
                    }
                }
            }
        }
        // For k <= k2, each component of the smaller cap nests in exactly one
        // component of the larger cap.
        for k in 0..d.half_steps() - 1 {
            let coarse = d.components_at(k);
            for comp in d.components_at(k + 1) {
                let containing: Vec<_> = coarse
                    .iter()
                    .filter(|big| comp.iter().all(|i| big.binary_search(i).is_ok()))
                    .collect();
                assert_eq!(containing.len(), 1);
            }
        }
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let d1 = Domain::build_interval(3.0 * PI, 64).unwrap();
        let text = d1.to_text();
        let d2 = Domain::from_text(&text).unwrap();
        assert_eq!(*d1, *d2);
        assert_eq!(text, d2.to_text());

        let rows = Domain::rows_from_half_cells(&[4, 2, 4]);
        let d3 = Domain::build_symmetric_2d(0.125, &rows).unwrap();
        let text3 = d3.to_text();
        let d4 = Domain::from_text(&text3).unwrap();
        assert_eq!(*d3, *d4);
        assert_eq!(text3, d4.to_text());
    }

    #[test]
    fn malformed_text_is_reported_with_context() {
        assert!(Domain::from_text("nonsense").is_err());
        let d = Domain::build_interval(1.0, 8).unwrap();
        let bad = d.to_text().replace("mask", "masque");
        match Domain::from_text(&bad) {
            Err(CoreError::MalformedFile(msg)) => assert!(msg.contains("masque")),
            other => panic!("expected malformed-file error, got {other:?}"),
        }
    }
}

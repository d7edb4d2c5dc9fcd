use crate::field::Grid;
use crate::geometry::{Point, Torus, MAX_DIM};

// Keeps the index small when the interaction radius is tiny compared to L.
const MAX_CELLS: usize = 1 << 20;

/// Uniform-grid spatial index whose cells are at least `min_cell_size` wide,
/// so every point within that distance of `p` lies in `p`'s cell or one of its
/// immediate (periodic) neighbours.
#[derive(Debug, Clone)]
pub struct CellList {
    grid: Grid,
    cells: Vec<Vec<usize>>,
    cell_of: Vec<usize>,
    slot_of: Vec<usize>,
}

impl CellList {
    pub fn new(torus: Torus, min_cell_size: f64, positions: &[Point]) -> Self {
        let mut n = if min_cell_size > 0.0 {
            ((torus.length / min_cell_size).floor() as usize).max(1)
        } else {
            1
        };
        while n > 1 && n.pow(torus.dim as u32) > MAX_CELLS {
            n /= 2;
        }
        let grid = Grid { torus, n_cells: n };
        let mut list = CellList {
            grid,
            cells: vec![Vec::new(); grid.len()],
            cell_of: Vec::with_capacity(positions.len()),
            slot_of: Vec::with_capacity(positions.len()),
        };
        for (i, p) in positions.iter().enumerate() {
            let c = grid.cell_of(p);
            list.cell_of.push(c);
            list.slot_of.push(list.cells[c].len());
            list.cells[c].push(i);
        }
        list
    }

    pub fn cells_per_axis(&self) -> usize {
        self.grid.n_cells
    }

    pub fn cell_size(&self) -> f64 {
        self.grid.spacing()
    }

    /// Updates the index after particle `i` moved to `p`.
    pub fn relocate(&mut self, i: usize, p: &Point) {
        let new_cell = self.grid.cell_of(p);
        let old_cell = self.cell_of[i];
        if new_cell == old_cell {
            return;
        }
        let slot = self.slot_of[i];
        self.cells[old_cell].swap_remove(slot);
        if let Some(&moved) = self.cells[old_cell].get(slot) {
            self.slot_of[moved] = slot;
        }
        self.cell_of[i] = new_cell;
        self.slot_of[i] = self.cells[new_cell].len();
        self.cells[new_cell].push(i);
    }

    /// Flat indices of the distinct cells in the periodic 3^d block around `p`.
    pub fn neighbor_cells(&self, p: &Point) -> Vec<usize> {
        let dim = self.grid.dim();
        let center = self.grid.multi_index(self.grid.cell_of(p));
        let mut out = Vec::with_capacity(3usize.pow(dim as u32));
        let mut offset = [0i64; MAX_DIM];
        for code in 0..3usize.pow(dim as u32) {
            let mut c = code;
            for o in offset.iter_mut().take(dim) {
                *o = (c % 3) as i64 - 1;
                c /= 3;
            }
            out.push(self.grid.shifted(&center, &offset));
        }
        if self.grid.n_cells < 3 {
            out.sort_unstable();
            out.dedup();
        }
        out
    }

    /// Calls `f` with every particle index that may lie within one cell width of `p`.
    pub fn for_each_candidate<F: FnMut(usize)>(&self, p: &Point, mut f: F) {
        for c in self.neighbor_cells(p) {
            for &i in &self.cells[c] {
                f(i);
            }
        }
    }

    /// Checks that the index agrees with `positions`.
    pub fn is_consistent(&self, positions: &[Point]) -> bool {
        if self.cell_of.len() != positions.len() {
            return false;
        }
        let total: usize = self.cells.iter().map(Vec::len).sum();
        total == positions.len()
            && positions.iter().enumerate().all(|(i, p)| {
                let c = self.cell_of[i];
                c == self.grid.cell_of(p) && self.cells[c].get(self.slot_of[i]) == Some(&i)
            })
    }
}

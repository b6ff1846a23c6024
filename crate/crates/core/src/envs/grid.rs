//! Deterministic 4-action gridworld with an exact BFS distance oracle.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridAction {
    Up,
    Down,
    Left,
    Right,
}

impl GridAction {
    pub const ALL: [GridAction; 4] = [
        GridAction::Up,
        GridAction::Down,
        GridAction::Left,
        GridAction::Right,
    ];

    pub fn index(self) -> usize {
        match self {
            GridAction::Up => 0,
            GridAction::Down => 1,
            GridAction::Left => 2,
            GridAction::Right => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// One-hot encoding used as the action input of latent models.
    pub fn one_hot(self) -> [f64; 4] {
        let mut v = [0.0; 4];
        v[self.index()] = 1.0;
        v
    }

    fn delta(self) -> (isize, isize) {
        // Row 0 is the top line of a map file, so "up" decreases y.
        match self {
            GridAction::Up => (0, -1),
            GridAction::Down => (0, 1),
            GridAction::Left => (-1, 0),
            GridAction::Right => (1, 0),
        }
    }
}

pub type Cell = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridWorld {
    width: usize,
    height: usize,
    walls: Vec<bool>,
    agent: Cell,
}

impl GridWorld {
    /// An open map with the agent at the first open cell.
    pub fn open(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn new(width: usize, height: usize, walls: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Config("grid dimensions must be positive".into()));
        }
        if walls.len() != width * height {
            return Err(Error::shape("wall grid", width * height, walls.len()));
        }
        let first = walls
            .iter()
            .position(|w| !w)
            .ok_or_else(|| Error::Config("grid has no open cell".into()))?;
        Ok(GridWorld {
            width,
            height,
            walls,
            agent: (first % width, first / width),
        })
    }

    /// Default 10×10 map: a vertical wall at x = 5 from the top edge down to
    /// y = 6, so crossing between the upper halves needs a detour through
    /// the bottom three rows.
    pub fn default_map() -> Self {
        let (w, h) = (10, 10);
        let mut walls = vec![false; w * h];
        for y in 0..=6 {
            walls[y * w + 5] = true;
        }
        GridWorld::new(w, h, walls).expect("default map is valid")
    }

    /// Parses a map: `#` wall, `.` open, one row per line.
    pub fn parse_map(text: &str) -> Result<Self> {
        let rows: Vec<&str> = text
            .lines()
            .map(str::trim_end)
            .filter(|l| !l.is_empty())
            .collect();
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut walls = Vec::with_capacity(width * height);
        for (y, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(Error::Format(format!(
                    "map row {y} has {} cells, expected {width}",
                    row.chars().count()
                )));
            }
            for (x, c) in row.chars().enumerate() {
                walls.push(match c {
                    '#' => true,
                    '.' => false,
                    other => {
                        return Err(Error::Format(format!(
                            "unexpected map character {other:?} at ({x}, {y})"
                        )))
                    }
                });
            }
        }
        GridWorld::new(width, height, walls)
    }

    pub fn to_map_string(&self) -> String {
        let mut s = String::with_capacity((self.width + 1) * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                s.push(if self.is_wall((x, y)) { '#' } else { '.' });
            }
            s.push('\n');
        }
        s
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn agent(&self) -> Cell {
        self.agent
    }

    pub fn is_wall(&self, (x, y): Cell) -> bool {
        self.walls[y * self.width + x]
    }

    pub fn in_bounds(&self, (x, y): Cell) -> bool {
        x < self.width && y < self.height
    }

    pub fn cell_index(&self, (x, y): Cell) -> usize {
        y * self.width + x
    }

    pub fn open_cells(&self) -> Vec<Cell> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (x, y)))
            .filter(|&c| !self.is_wall(c))
            .collect()
    }

    pub fn set_agent(&mut self, cell: Cell) -> Result<()> {
        if !self.in_bounds(cell) || self.is_wall(cell) {
            return Err(Error::Usage(format!("cell {cell:?} is not an open cell")));
        }
        self.agent = cell;
        Ok(())
    }

    /// Cell reached from `cell` by `action`; blocked moves stay in place.
    pub fn successor(&self, (x, y): Cell, action: GridAction) -> Cell {
        let (dx, dy) = action.delta();
        let nx = x as isize + dx;
        let ny = y as isize + dy;
        if nx < 0 || ny < 0 {
            return (x, y);
        }
        let next = (nx as usize, ny as usize);
        if !self.in_bounds(next) || self.is_wall(next) {
            (x, y)
        } else {
            next
        }
    }

    /// Moves the agent one cell unless the target is a wall or out of bounds.
    pub fn step(&self, action: GridAction) -> GridWorld {
        let mut next = self.clone();
        next.agent = self.successor(self.agent, action);
        next
    }

    /// BFS distances from `source` to every cell (`None` for walls and
    /// unreachable cells), indexed by [`GridWorld::cell_index`].
    pub fn bfs_from(&self, source: Cell) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.width * self.height];
        if !self.in_bounds(source) || self.is_wall(source) {
            return dist;
        }
        dist[self.cell_index(source)] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(c) = queue.pop_front() {
            let d = dist[self.cell_index(c)].expect("queued cells have a distance");
            for a in GridAction::ALL {
                let n = self.successor(c, a);
                let slot = &mut dist[self.cell_index(n)];
                if slot.is_none() {
                    *slot = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    /// Minimum number of actions from `s1` to `s2`; `None` when unreachable.
    pub fn bfs_distance(&self, s1: Cell, s2: Cell) -> Option<u32> {
        if !self.in_bounds(s2) {
            return None;
        }
        self.bfs_from(s1)[self.cell_index(s2)]
    }

    /// All-pairs distance table over `cell_index` positions.
    pub fn distance_table(&self) -> Vec<Vec<Option<u32>>> {
        (0..self.width * self.height)
            .map(|i| self.bfs_from((i % self.width, i / self.width)))
            .collect()
    }

    /// Modality A: flattened one-hot occupancy grid. Modality B: coordinates
    /// scaled to `[0, 1]`.
    pub fn observe(&self) -> Vec<Vec<f64>> {
        self.observe_cell(self.agent)
    }

    /// The observation the agent would receive at `cell`.
    pub fn observe_cell(&self, cell: Cell) -> Vec<Vec<f64>> {
        let mut occupancy = vec![0.0; self.width * self.height];
        occupancy[self.cell_index(cell)] = 1.0;
        let scale = |v: usize, n: usize| if n > 1 { v as f64 / (n - 1) as f64 } else { 0.0 };
        let coords = vec![scale(cell.0, self.width), scale(cell.1, self.height)];
        vec![occupancy, coords]
    }
}

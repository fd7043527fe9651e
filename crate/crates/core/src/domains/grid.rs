use std::fmt;

/// Grid cell; row 0 is the top row, column 0 the leftmost column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pos {
    pub row: u8,
    pub col: u8,
}

impl Pos {
    pub fn new(row: usize, col: usize) -> Self {
        debug_assert!(row < 256 && col < 256);
        Self {
            row: row as u8,
            col: col as u8,
        }
    }

    pub fn r(self) -> usize {
        self.row as usize
    }

    pub fn c(self) -> usize {
        self.col as usize
    }

    pub fn tuple(self) -> (usize, usize) {
        (self.r(), self.c())
    }

    pub fn manhattan(self, other: Pos) -> usize {
        self.r().abs_diff(other.r()) + self.c().abs_diff(other.c())
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dir {
    Up,
    Down,
    Left,
    Right,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::Up, Dir::Down, Dir::Left, Dir::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Dir::Up => "up",
            Dir::Down => "down",
            Dir::Left => "left",
            Dir::Right => "right",
        }
    }

    pub fn from_name(name: &str) -> Option<Dir> {
        Dir::ALL.into_iter().find(|d| d.name() == name)
    }

    pub fn opposite(self) -> Dir {
        match self {
            Dir::Up => Dir::Down,
            Dir::Down => Dir::Up,
            Dir::Left => Dir::Right,
            Dir::Right => Dir::Left,
        }
    }

    pub fn delta(self) -> (isize, isize) {
        match self {
            Dir::Up => (-1, 0),
            Dir::Down => (1, 0),
            Dir::Left => (0, -1),
            Dir::Right => (0, 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub h: usize,
    pub w: usize,
}

impl Dims {
    pub fn new(h: usize, w: usize) -> Self {
        Self { h, w }
    }

    pub fn cells(self) -> usize {
        self.h * self.w
    }

    pub fn contains(self, row: isize, col: isize) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.h && (col as usize) < self.w
    }

    pub fn idx(self, p: Pos) -> usize {
        p.r() * self.w + p.c()
    }

    pub fn pos(self, idx: usize) -> Pos {
        Pos::new(idx / self.w, idx % self.w)
    }

    pub fn step(self, p: Pos, d: Dir) -> Option<Pos> {
        let (dr, dc) = d.delta();
        let (r, c) = (p.r() as isize + dr, p.c() as isize + dc);
        self.contains(r, c).then(|| Pos::new(r as usize, c as usize))
    }

    pub fn positions(self) -> impl Iterator<Item = Pos> {
        (0..self.h).flat_map(move |r| (0..self.w).map(move |c| Pos::new(r, c)))
    }

    /// Dimensions after a clockwise quarter turn.
    pub fn rotated(self) -> Dims {
        Dims::new(self.w, self.h)
    }

    /// Where `p` lands after a clockwise quarter turn of a grid with these dims.
    pub fn rotate_pos(self, p: Pos) -> Pos {
        Pos::new(p.c(), self.h - 1 - p.r())
    }

    /// Permutes a row-major cell vector for a clockwise quarter turn.
    pub fn rotate_cells<V: Clone>(self, cells: &[V]) -> Vec<V> {
        let out_dims = self.rotated();
        let mut out: Vec<Option<V>> = vec![None; cells.len()];
        for p in self.positions() {
            out[out_dims.idx(self.rotate_pos(p))] = Some(cells[self.idx(p)].clone());
        }
        out.into_iter().map(|v| v.expect("rotation is a bijection")).collect()
    }
}

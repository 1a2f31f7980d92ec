/// Mixed partial-derivative multi-index over chart coordinates x and fiber
/// coordinates v.  Orders are stored per axis; the supported chart dimension
/// is capped so the type stays `Copy` and allocation-free in hot loops.
pub const MAX_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Deriv {
    pub n: usize,
    pub x: [u8; MAX_DIM],
    pub v: [u8; MAX_DIM],
}

impl Deriv {
    pub fn none(n: usize) -> Self {
        assert!(n <= MAX_DIM);
        Deriv { n, x: [0; MAX_DIM], v: [0; MAX_DIM] }
    }

    pub fn dx(mut self, i: usize) -> Self {
        self.x[i] += 1;
        self
    }

    pub fn dv(mut self, i: usize) -> Self {
        self.v[i] += 1;
        self
    }

    pub fn x_order(&self) -> usize {
        self.x[..self.n].iter().map(|&a| a as usize).sum()
    }

    pub fn v_order(&self) -> usize {
        self.v[..self.n].iter().map(|&a| a as usize).sum()
    }

    pub fn order(&self) -> usize {
        self.x_order() + self.v_order()
    }

    /// Axes carrying v-derivatives, with multiplicity, in axis order.
    pub fn v_slots(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).flat_map(move |i| std::iter::repeat(i).take(self.v[i] as usize))
    }

    /// Axes carrying x-derivatives, with multiplicity, in axis order.
    pub fn x_slots(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).flat_map(move |i| std::iter::repeat(i).take(self.x[i] as usize))
    }
}

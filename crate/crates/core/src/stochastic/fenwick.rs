/// Binary indexed tree over nonnegative `f64` weights, with prefix search.
#[derive(Debug, Clone)]
pub struct Fenwick {
    tree: Vec<f64>,
}

impl Fenwick {
    /// Capacity is rounded up to a power of two so that search can descend
    /// by halving.
    pub fn with_capacity(n: usize) -> Self {
        Fenwick {
            tree: vec![0.0; n.max(1).next_power_of_two() + 1],
        }
    }

    pub fn from_values(values: &[f64]) -> Self {
        let mut f = Self::with_capacity(values.len());
        f.rebuild(values);
        f
    }

    /// Number of slots (zero-based indices `0..capacity`).
    pub fn capacity(&self) -> usize {
        self.tree.len() - 1
    }

    /// Linear-time rebuild; slots beyond `values` become zero.
    pub fn rebuild(&mut self, values: &[f64]) {
        let n = self.capacity();
        assert!(values.len() <= n);
        self.tree.iter_mut().for_each(|v| *v = 0.0);
        self.tree[1..=values.len()].copy_from_slice(values);
        for i in 1..=n {
            let j = i + (i & i.wrapping_neg());
            if j <= n {
                self.tree[j] += self.tree[i];
            }
        }
    }

    pub fn add(&mut self, index: usize, delta: f64) {
        let n = self.capacity();
        let mut i = index + 1;
        while i <= n {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    pub fn total(&self) -> f64 {
        self.tree[self.capacity()]
    }

    pub fn prefix(&self, count: usize) -> f64 {
        let mut i = count.min(self.capacity());
        let mut s = 0.0;
        while i > 0 {
            s += self.tree[i];
            i &= i - 1;
        }
        s
    }

    /// Smallest index whose inclusive prefix sum exceeds `u`. Returns the
    /// last slot if rounding pushes `u` past the total.
    pub fn find(&self, mut u: f64) -> usize {
        let n = self.capacity();
        let mut pos = 0;
        let mut step = n;
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= u {
                pos = next;
                u -= self.tree[next];
            }
            step >>= 1;
        }
        pos.min(n - 1)
    }
}

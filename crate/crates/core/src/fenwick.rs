/// Order-statistic set over `1..=n` backed by a Fenwick tree.
#[derive(Debug, Clone)]
pub(crate) struct OrderStatTree {
    tree: Vec<u32>,
    log: u32,
    len: usize,
}

impl OrderStatTree {
    /// All of `1..=n` present.
    pub fn full(n: usize) -> Self {
        let mut tree = vec![0u32; n + 1];
        for i in 1..=n {
            tree[i] += 1;
            let parent = i + (i & i.wrapping_neg());
            if parent <= n {
                tree[parent] += tree[i];
            }
        }
        let log = usize::BITS - n.leading_zeros();
        OrderStatTree { tree, log, len: n }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn remove(&mut self, mut i: usize) {
        self.len -= 1;
        while i < self.tree.len() {
            self.tree[i] -= 1;
            i += i & i.wrapping_neg();
        }
    }

    /// The `k`-th smallest element present (1-based `k`).
    pub fn kth(&self, mut k: u32) -> usize {
        debug_assert!(k >= 1 && k as usize <= self.len());
        let mut pos = 0usize;
        let mut step = 1usize << self.log;
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] < k {
                pos = next;
                k -= self.tree[next];
            }
            step >>= 1;
        }
        pos + 1
    }

    /// Removes and returns the `k`-th smallest element.
    pub fn take_kth(&mut self, k: u32) -> usize {
        let x = self.kth(k);
        self.remove(x);
        x
    }
}

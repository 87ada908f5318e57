//! Binary max-heap over variables keyed by activity, with an index map for
//! in-place activity updates. Ties break toward the smaller variable index,
//! which keeps decision order deterministic and makes an unseeded solver
//! branch on variables in ascending order.

pub(crate) struct ActivityHeap {
    heap: Vec<u32>,
    /// Position of each variable in `heap`, or `usize::MAX` if absent.
    position: Vec<usize>,
    activity: Vec<f64>,
}

const ABSENT: usize = usize::MAX;

impl ActivityHeap {
    pub fn new(num_vars: usize) -> ActivityHeap {
        ActivityHeap {
            heap: Vec::with_capacity(num_vars),
            position: vec![ABSENT; num_vars],
            activity: vec![0.0; num_vars],
        }
    }

    pub fn set_activity(&mut self, var: u32, value: f64) {
        self.activity[var as usize] = value;
        if self.contains(var) {
            let pos = self.position[var as usize];
            self.sift_up(pos);
            let pos = self.position[var as usize];
            self.sift_down(pos);
        }
    }

    pub fn rescale(&mut self, factor: f64) {
        for a in &mut self.activity {
            *a *= factor;
        }
        // Relative order is unchanged; the heap stays valid.
    }

    pub fn bump(&mut self, var: u32, inc: f64) -> f64 {
        let a = &mut self.activity[var as usize];
        *a += inc;
        let new = *a;
        if self.contains(var) {
            let pos = self.position[var as usize];
            self.sift_up(pos);
        }
        new
    }

    pub fn contains(&self, var: u32) -> bool {
        self.position[var as usize] != ABSENT
    }

    pub fn insert(&mut self, var: u32) {
        if self.contains(var) {
            return;
        }
        self.position[var as usize] = self.heap.len();
        self.heap.push(var);
        self.sift_up(self.heap.len() - 1);
    }

    pub fn pop_max(&mut self) -> Option<u32> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().expect("non-empty");
        self.position[top as usize] = ABSENT;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.position[last as usize] = 0;
            self.sift_down(0);
        }
        Some(top)
    }

    /// `a` orders strictly before `b`: higher activity first, then lower index.
    fn before(&self, a: u32, b: u32) -> bool {
        let (aa, ab) = (self.activity[a as usize], self.activity[b as usize]);
        aa > ab || (aa == ab && a < b)
    }

    fn sift_up(&mut self, mut pos: usize) {
        let var = self.heap[pos];
        while pos > 0 {
            let parent = (pos - 1) / 2;
            if !self.before(var, self.heap[parent]) {
                break;
            }
            self.heap[pos] = self.heap[parent];
            self.position[self.heap[pos] as usize] = pos;
            pos = parent;
        }
        self.heap[pos] = var;
        self.position[var as usize] = pos;
    }

    fn sift_down(&mut self, mut pos: usize) {
        let var = self.heap[pos];
        loop {
            let left = 2 * pos + 1;
            if left >= self.heap.len() {
                break;
            }
            let right = left + 1;
            let child = if right < self.heap.len() && self.before(self.heap[right], self.heap[left])
            {
                right
            } else {
                left
            };
            if !self.before(self.heap[child], var) {
                break;
            }
            self.heap[pos] = self.heap[child];
            self.position[self.heap[pos] as usize] = pos;
            pos = child;
        }
        self.heap[pos] = var;
        self.position[var as usize] = pos;
    }
}

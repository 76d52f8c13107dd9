use crate::cnf::Var;

/// Max-heap of variables keyed by activity; ties go to the lower index.
#[derive(Debug, Clone, Default)]
pub(crate) struct VarOrder {
    heap: Vec<Var>,
    pos: Vec<Option<usize>>,
}

#[inline]
fn before(act: &[f64], a: Var, b: Var) -> bool {
    let (x, y) = (act[a.index()], act[b.index()]);
    x > y || (x == y && a.0 < b.0)
}

impl VarOrder {
    pub fn new(num_vars: usize) -> Self {
        let mut o = VarOrder {
            heap: Vec::with_capacity(num_vars),
            pos: vec![None; num_vars + 1],
        };
        for v in 1..=num_vars {
            o.pos[v] = Some(o.heap.len());
            o.heap.push(Var(v as u32));
        }
        o
    }

    pub fn contains(&self, v: Var) -> bool {
        self.pos[v.index()].is_some()
    }

    pub fn insert(&mut self, v: Var, act: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.pos[v.index()] = Some(self.heap.len());
        self.heap.push(v);
        self.sift_up(self.heap.len() - 1, act);
    }

    /// Restores heap order after `v`'s activity increased.
    pub fn increased(&mut self, v: Var, act: &[f64]) {
        if let Some(i) = self.pos[v.index()] {
            self.sift_up(i, act);
        }
    }

    pub fn pop(&mut self, act: &[f64]) -> Option<Var> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().unwrap();
        self.pos[top.index()] = None;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.pos[last.index()] = Some(0);
            self.sift_down(0, act);
        }
        Some(top)
    }

    fn sift_up(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            if !before(act, v, self.heap[parent]) {
                break;
            }
            self.heap[i] = self.heap[parent];
            self.pos[self.heap[i].index()] = Some(i);
            i = parent;
        }
        self.heap[i] = v;
        self.pos[v.index()] = Some(i);
    }

    fn sift_down(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        loop {
            let l = 2 * i + 1;
            if l >= self.heap.len() {
                break;
            }
            let r = l + 1;
            let child = if r < self.heap.len() && before(act, self.heap[r], self.heap[l]) {
                r
            } else {
                l
            };
            if !before(act, self.heap[child], v) {
                break;
            }
            self.heap[i] = self.heap[child];
            self.pos[self.heap[i].index()] = Some(i);
            i = child;
        }
        self.heap[i] = v;
        self.pos[v.index()] = Some(i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pops_by_activity_then_index() {
        let mut act = vec![0.0; 6];
        let mut o = VarOrder::new(5);
        for (v, a) in [(1, 1.0), (2, 3.0), (3, 1.0), (4, 3.0), (5, 0.5)] {
            act[v] = a;
            o.increased(Var(v as u32), &act);
        }
        let order: Vec<u32> = std::iter::from_fn(|| o.pop(&act)).map(|v| v.0).collect();
        assert_eq!(order, vec![2, 4, 1, 3, 5]);
    }

    #[test]
    fn reinsert_and_bump() {
        let mut act = vec![0.0; 4];
        let mut o = VarOrder::new(3);
        assert_eq!(o.pop(&act), Some(Var(1)));
        act[3] = 2.0;
        o.increased(Var(3), &act);
        o.insert(Var(1), &act);
        assert_eq!(o.pop(&act), Some(Var(3)));
        assert_eq!(o.pop(&act), Some(Var(1)));
        assert_eq!(o.pop(&act), Some(Var(2)));
        assert_eq!(o.pop(&act), None);
    }
}

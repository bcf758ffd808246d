//! Line-level shortest-edit-script computation.

/// One aligned step of an edit script. Indices point into the original
/// sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineOp {
    Keep { a: usize, b: usize },
    Del { a: usize },
    Ins { b: usize },
}

/// Edit distance ceiling before falling back to a full replacement script.
/// Keeps worst-case memory bounded; patches in this pipeline are small.
const MAX_D: usize = 1024;

/// Myers edit script between two line slices, with common prefix and suffix
/// stripped first. Exceeding the edit-distance cap degrades to delete-all
/// then insert-all for the differing middle, which stays a valid script.
pub fn diff_ops<T: PartialEq>(a: &[T], b: &[T]) -> Vec<LineOp> {
    let mut prefix = 0;
    while prefix < a.len() && prefix < b.len() && a[prefix] == b[prefix] {
        prefix += 1;
    }
    let mut suffix = 0;
    while suffix < a.len() - prefix && suffix < b.len() - prefix
        && a[a.len() - 1 - suffix] == b[b.len() - 1 - suffix]
    {
        suffix += 1;
    }
    let mid_a = &a[prefix..a.len() - suffix];
    let mid_b = &b[prefix..b.len() - suffix];

    let mut ops = Vec::with_capacity(a.len() + b.len());
    for i in 0..prefix {
        ops.push(LineOp::Keep { a: i, b: i });
    }
    middle_ops(mid_a, mid_b, prefix, &mut ops);
    for i in 0..suffix {
        ops.push(LineOp::Keep {
            a: a.len() - suffix + i,
            b: b.len() - suffix + i,
        });
    }
    ops
}

fn middle_ops<T: PartialEq>(a: &[T], b: &[T], offset: usize, ops: &mut Vec<LineOp>) {
    let (n, m) = (a.len(), b.len());
    if n == 0 && m == 0 {
        return;
    }
    match myers_trace(a, b) {
        Some(trace) => backtrack(a, b, &trace, offset, ops),
        None => {
            for i in 0..n {
                ops.push(LineOp::Del { a: offset + i });
            }
            for j in 0..m {
                ops.push(LineOp::Ins { b: offset + j });
            }
        }
    }
}

/// Forward Myers search, returning the V-array snapshot per step, or `None`
/// past the cap.
fn myers_trace<T: PartialEq>(a: &[T], b: &[T]) -> Option<Vec<Vec<isize>>> {
    let (n, m) = (a.len() as isize, b.len() as isize);
    let max = ((n + m) as usize).min(MAX_D);
    let width = 2 * max + 1;
    let mut v = vec![0isize; width];
    let mut trace = Vec::new();
    for d in 0..=max as isize {
        trace.push(v.clone());
        let mut k = -d;
        while k <= d {
            let idx = (k + max as isize) as usize;
            let mut x = if k == -d || (k != d && v[idx - 1] < v[idx + 1]) {
                v[idx + 1]
            } else {
                v[idx - 1] + 1
            };
            let mut y = x - k;
            while x < n && y < m && a[x as usize] == b[y as usize] {
                x += 1;
                y += 1;
            }
            v[idx] = x;
            if x >= n && y >= m {
                trace.push(v.clone());
                trace.truncate(d as usize + 1);
                return Some(trace);
            }
            k += 2;
        }
    }
    None
}

fn backtrack<T: PartialEq>(
    a: &[T],
    b: &[T],
    trace: &[Vec<isize>],
    offset: usize,
    ops: &mut Vec<LineOp>,
) {
    let max = (trace[0].len() - 1) / 2;
    let mut x = a.len() as isize;
    let mut y = b.len() as isize;
    let mut rev = Vec::new();
    for d in (0..trace.len() as isize).rev() {
        if x == 0 && y == 0 {
            break;
        }
        let v = &trace[d as usize];
        let k = x - y;
        let idx = (k + max as isize) as usize;
        let (prev_k, went_down) = if k == -d || (k != d && v[idx - 1] < v[idx + 1]) {
            (k + 1, true)
        } else {
            (k - 1, false)
        };
        let prev_x = if d == 0 { 0 } else { v[(prev_k + max as isize) as usize] };
        let prev_y = prev_x - prev_k;
        while x > prev_x.max(0) && y > prev_y.max(0) && x - y == k {
            x -= 1;
            y -= 1;
            rev.push(LineOp::Keep {
                a: offset + x as usize,
                b: offset + y as usize,
            });
        }
        if d == 0 {
            break;
        }
        if went_down {
            y -= 1;
            rev.push(LineOp::Ins {
                b: offset + y as usize,
            });
        } else {
            x -= 1;
            rev.push(LineOp::Del {
                a: offset + x as usize,
            });
        }
    }
    rev.reverse();
    ops.extend(rev);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apply(a: &[&str], ops: &[LineOp]) -> Vec<String> {
        let mut out = Vec::new();
        for op in ops {
            match op {
                LineOp::Keep { a: i, .. } | LineOp::Del { a: i } => {
                    assert!(*i < a.len());
                    if matches!(op, LineOp::Keep { .. }) {
                        out.push(a[*i].to_string());
                    }
                }
                LineOp::Ins { .. } => {}
            }
        }
        out
    }

    fn reconstruct(b: &[&str], ops: &[LineOp]) -> Vec<String> {
        ops.iter()
            .filter_map(|op| match op {
                LineOp::Keep { b: j, .. } | LineOp::Ins { b: j } => Some(b[*j].to_string()),
                LineOp::Del { .. } => None,
            })
            .collect()
    }

    #[test]
    fn scripts_reconstruct_target() {
        let cases: &[(&[&str], &[&str])] = &[
            (&["a", "b", "c"], &["a", "x", "c"]),
            (&[], &["a"]),
            (&["a"], &[]),
            (&["a", "b"], &["a", "b"]),
            (&["x", "a", "b"], &["a", "b", "y"]),
            (&["a", "b", "c", "d"], &["d", "c", "b", "a"]),
        ];
        for (a, b) in cases {
            let ops = diff_ops(a, b);
            assert_eq!(reconstruct(b, &ops), b.to_vec(), "case {a:?} -> {b:?}");
            let kept = apply(a, &ops);
            let kept_in_b: Vec<String> = ops
                .iter()
                .filter_map(|op| match op {
                    LineOp::Keep { b: j, .. } => Some(b[*j].to_string()),
                    _ => None,
                })
                .collect();
            assert_eq!(kept, kept_in_b);
        }
    }

    #[test]
    fn minimal_for_single_change() {
        let a = ["1", "2", "3", "4"];
        let b = ["1", "2", "x", "4"];
        let ops = diff_ops(&a, &b);
        let edits = ops
            .iter()
            .filter(|o| !matches!(o, LineOp::Keep { .. }))
            .count();
        assert_eq!(edits, 2);
    }
}

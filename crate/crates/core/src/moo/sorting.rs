use crate::evaluator::Objectives;

/// Pareto dominance for minimization.
pub fn dominates(a: &Objectives, b: &Objectives) -> bool {
    a.error <= b.error && a.area <= b.area && (a.error < b.error || a.area < b.area)
}

/// Fast non-dominated sort. Front 0 is the non-dominated set; indices
/// within a front are ascending.
pub fn nondominated_fronts(objs: &[Objectives]) -> Vec<Vec<usize>> {
    let n = objs.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut counts = vec![0usize; n];
    for p in 0..n {
        for q in p + 1..n {
            if dominates(&objs[p], &objs[q]) {
                dominated_by[p].push(q);
                counts[q] += 1;
            } else if dominates(&objs[q], &objs[p]) {
                dominated_by[q].push(p);
                counts[p] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| counts[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &p in &current {
            for &q in &dominated_by[p] {
                counts[q] -= 1;
                if counts[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

/// Crowding distance of each member of one front, in input order.
///
/// Boundary members of each objective get `+inf`; interior members add
/// `(next - prev) / (max - min)`. An objective with zero range adds nothing.
/// Fronts of one or two members are all `+inf`.
pub fn crowding_distance(front: &[Objectives]) -> Vec<f64> {
    let n = front.len();
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let mut dist = vec![0.0f64; n];
    let keys: [fn(&Objectives) -> f64; 2] = [|o| o.error, |o| o.area];
    for key in keys {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| key(&front[a]).total_cmp(&key(&front[b])).then(a.cmp(&b)));
        let (lo, hi) = (key(&front[order[0]]), key(&front[order[n - 1]]));
        let range = hi - lo;
        if range == 0.0 {
            continue;
        }
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        for w in 1..n - 1 {
            let gap = key(&front[order[w + 1]]) - key(&front[order[w - 1]]);
            dist[order[w]] += gap / range;
        }
    }
    dist
}

/// Crowding used during survival: exact duplicates in objective space share
/// one slot. The first occurrence gets the distance computed over distinct
/// points, later copies get 0 so truncation drops them first.
pub fn survival_crowding(front: &[Objectives]) -> Vec<f64> {
    let mut distinct: Vec<Objectives> = Vec::new();
    let mut slot = Vec::with_capacity(front.len());
    for o in front {
        match distinct.iter().position(|d| d == o) {
            Some(i) => slot.push((i, true)),
            None => {
                distinct.push(*o);
                slot.push((distinct.len() - 1, false));
            }
        }
    }
    let d = crowding_distance(&distinct);
    slot.into_iter().map(|(i, dup)| if dup { 0.0 } else { d[i] }).collect()
}

/// Area dominated by `points` inside the box bounded by `reference`.
/// Points not strictly better than the reference in both objectives add
/// nothing.
pub fn hypervolume(points: &[Objectives], reference: Objectives) -> f64 {
    let mut inside: Vec<Objectives> = points
        .iter()
        .filter(|p| p.error < reference.error && p.area < reference.area)
        .copied()
        .collect();
    inside.sort_by(|a, b| a.error.total_cmp(&b.error).then(a.area.total_cmp(&b.area)));
    let mut volume = 0.0;
    let mut best_area = reference.area;
    let mut staircase: Vec<Objectives> = Vec::new();
    for p in inside {
        if p.area < best_area {
            best_area = p.area;
            staircase.push(p);
        }
    }
    for (i, p) in staircase.iter().enumerate() {
        let next_error = staircase.get(i + 1).map_or(reference.error, |q| q.error);
        volume += (next_error - p.error) * (reference.area - p.area);
    }
    volume
}

#[cfg(test)]
mod tests {
    use super::*;

    fn o(error: f64, area: f64) -> Objectives {
        Objectives { error, area }
    }

    #[test]
    fn dominance_cases() {
        assert!(dominates(&o(0.1, 10.0), &o(0.2, 12.0)));
        assert!(!dominates(&o(0.1, 10.0), &o(0.1, 10.0)));
        assert!(!dominates(&o(0.1, 12.0), &o(0.2, 10.0)));
        assert!(!dominates(&o(0.2, 10.0), &o(0.1, 12.0)));
        assert!(dominates(&o(0.1, 10.0), &o(0.1, 11.0)));
    }

    #[test]
    fn fronts_small_examples() {
        assert_eq!(
            nondominated_fronts(&[o(0.1, 10.0), o(0.2, 5.0), o(0.15, 12.0)]),
            vec![vec![0, 1], vec![2]]
        );
        assert_eq!(nondominated_fronts(&[o(0.3, 3.0); 4]), vec![vec![0, 1, 2, 3]]);
        let chain: Vec<_> = (0..5).map(|i| o(i as f64, i as f64)).collect();
        assert_eq!(nondominated_fronts(&chain), (0..5).map(|i| vec![i]).collect::<Vec<_>>());
        assert!(nondominated_fronts(&[]).is_empty());
    }

    #[test]
    fn crowding_examples() {
        assert_eq!(crowding_distance(&[o(0.1, 1.0), o(0.2, 0.5)]), vec![f64::INFINITY; 2]);
        let d = crowding_distance(&[o(0.1, 30.0), o(0.2, 20.0), o(0.3, 10.0)]);
        assert_eq!(d[0], f64::INFINITY);
        assert_eq!(d[2], f64::INFINITY);
        assert!((d[1] - 2.0).abs() < 1e-12);
        // constant area: only error contributes
        let d = crowding_distance(&[o(0.0, 5.0), o(0.1, 5.0), o(0.4, 5.0), o(1.0, 5.0)]);
        assert_eq!(d[0], f64::INFINITY);
        assert!((d[1] - 0.4).abs() < 1e-12);
        assert!((d[2] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn duplicates_share_a_slot() {
        let d = survival_crowding(&[o(0.1, 3.0), o(0.1, 3.0), o(0.2, 2.0), o(0.3, 1.0)]);
        assert_eq!(d[0], f64::INFINITY);
        assert_eq!(d[1], 0.0);
        assert!(d[2].is_finite() && d[2] > 0.0);
    }

    #[test]
    fn hypervolume_staircase() {
        let r = o(1.0, 10.0);
        assert_eq!(hypervolume(&[], r), 0.0);
        assert!((hypervolume(&[o(0.5, 5.0)], r) - 2.5).abs() < 1e-12);
        // (0.2,8): 0.3*2 ; (0.5,4): 0.5*6
        let hv = hypervolume(&[o(0.5, 4.0), o(0.2, 8.0), o(0.6, 9.0), o(1.2, 0.0)], r);
        assert!((hv - (0.6 + 3.0)).abs() < 1e-12);
    }
}

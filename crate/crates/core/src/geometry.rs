//! Small dimension-agnostic vector helpers and segment predicates.
//!
//! Points are plain `&[f64]` slices of equal length. Nothing here allocates
//! except the functions that return a point.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

/// `a + t (b - a)`
pub fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

/// Closest point of segment `[a, b]` to `p`, returned as the parameter
/// `t in [0, 1]` together with the distance.
pub fn project_to_segment(p: &[f64], a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut ab2 = 0.0;
    let mut ap_ab = 0.0;
    for k in 0..p.len() {
        let ab = b[k] - a[k];
        ab2 += ab * ab;
        ap_ab += (p[k] - a[k]) * ab;
    }
    let t = if ab2 > 0.0 { (ap_ab / ab2).clamp(0.0, 1.0) } else { 0.0 };
    let mut d2 = 0.0;
    for k in 0..p.len() {
        let c = a[k] + t * (b[k] - a[k]);
        d2 += (p[k] - c) * (p[k] - c);
    }
    (t, d2.sqrt())
}

pub fn point_segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    project_to_segment(p, a, b).1
}

/// Closest pair between segments `[p0, p1]` and `[q0, q1]` in any dimension.
///
/// Returns `(s, t, distance)` where `s` and `t` are the parameters of the
/// closest points on the first and second segment. Parallel segments pick
/// one of the (possibly many) closest pairs.
pub fn segment_segment_closest(p0: &[f64], p1: &[f64], q0: &[f64], q1: &[f64]) -> (f64, f64, f64) {
    let n = p0.len();
    let mut a = 0.0; // |d1|^2
    let mut e = 0.0; // |d2|^2
    let mut b = 0.0; // d1.d2
    let mut c = 0.0; // d1.r
    let mut f = 0.0; // d2.r
    for k in 0..n {
        let d1 = p1[k] - p0[k];
        let d2 = q1[k] - q0[k];
        let r = p0[k] - q0[k];
        a += d1 * d1;
        e += d2 * d2;
        b += d1 * d2;
        c += d1 * r;
        f += d2 * r;
    }
    let (s, t);
    if a <= f64::MIN_POSITIVE && e <= f64::MIN_POSITIVE {
        s = 0.0;
        t = 0.0;
    } else if a <= f64::MIN_POSITIVE {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else if e <= f64::MIN_POSITIVE {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else {
        let denom = a * e - b * b;
        let mut s0 = if denom > 1e-14 * a * e {
            ((b * f - c * e) / denom).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let mut t0 = (b * s0 + f) / e;
        if t0 < 0.0 {
            t0 = 0.0;
            s0 = (-c / a).clamp(0.0, 1.0);
        } else if t0 > 1.0 {
            t0 = 1.0;
            s0 = ((b - c) / a).clamp(0.0, 1.0);
        }
        s = s0;
        t = t0;
    }
    let mut d2 = 0.0;
    for k in 0..n {
        let x = p0[k] + s * (p1[k] - p0[k]);
        let y = q0[k] + t * (q1[k] - q0[k]);
        d2 += (x - y) * (x - y);
    }
    (s, t, d2.sqrt())
}

/// Parameter interval `[t0, t1]` of segment `[a, b]` that lies inside the
/// closed ball of radius `r` around `c`, or `None` when they miss.
pub fn clip_segment_to_ball(a: &[f64], b: &[f64], c: &[f64], r: f64) -> Option<(f64, f64)> {
    // |a + t(b-a) - c|^2 = r^2  =>  A t^2 + 2 B t + C = 0
    let mut qa = 0.0;
    let mut qb = 0.0;
    let mut qc = 0.0;
    for k in 0..a.len() {
        let d = b[k] - a[k];
        let w = a[k] - c[k];
        qa += d * d;
        qb += d * w;
        qc += w * w;
    }
    qc -= r * r;
    if qa == 0.0 {
        return if qc <= 0.0 { Some((0.0, 1.0)) } else { None };
    }
    let disc = qb * qb - qa * qc;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = ((-qb - sq) / qa).max(0.0);
    let t1 = ((-qb + sq) / qa).min(1.0);
    (t0 <= t1).then_some((t0, t1))
}

/// If segment `[q0, q1]` lies on the supporting line of `[p0, p1]` (within
/// `tol`), returns its parameter interval on that line, ordered.
pub fn collinear_interval(p0: &[f64], p1: &[f64], q0: &[f64], q1: &[f64], tol: f64) -> Option<(f64, f64)> {
    let len2 = dist2(p0, p1);
    if len2 == 0.0 {
        return None;
    }
    let on_line = |q: &[f64]| -> Option<f64> {
        let mut w_d = 0.0;
        for k in 0..q.len() {
            w_d += (q[k] - p0[k]) * (p1[k] - p0[k]);
        }
        let t = w_d / len2;
        let mut off2 = 0.0;
        for k in 0..q.len() {
            let x = p0[k] + t * (p1[k] - p0[k]);
            off2 += (q[k] - x) * (q[k] - x);
        }
        (off2.sqrt() <= tol).then_some(t)
    };
    let t0 = on_line(q0)?;
    let t1 = on_line(q1)?;
    Some(if t0 <= t1 { (t0, t1) } else { (t1, t0) })
}

/// Sub-intervals of `[0, 1]` not covered by the union of `covers`, ignoring
/// gaps shorter than `gap_tol`.
pub fn uncovered_intervals(covers: &mut [(f64, f64)], gap_tol: f64) -> Vec<(f64, f64)> {
    covers.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    let mut out = Vec::new();
    let mut reach = 0.0_f64;
    for &(a, b) in covers.iter() {
        if b < 0.0 || a > 1.0 {
            continue;
        }
        if a > reach + gap_tol {
            out.push((reach, a.min(1.0)));
        }
        reach = reach.max(b);
        if reach >= 1.0 {
            break;
        }
    }
    if reach < 1.0 - gap_tol {
        out.push((reach, 1.0));
    }
    out
}

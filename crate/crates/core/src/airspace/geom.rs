//! Planar vector helpers. Headings are degrees clockwise from north
//! (+y), so a heading of 90 points along +x.

pub type Vec2 = [f64; 2];

#[inline]
pub fn add(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn scale(a: Vec2, k: f64) -> Vec2 {
    [a[0] * k, a[1] * k]
}

#[inline]
pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

/// Unit vector, or `None` for the zero vector.
pub fn unit(a: Vec2) -> Option<Vec2> {
    let n = norm(a);
    (n > 0.0).then(|| scale(a, 1.0 / n))
}

/// Angle between two nonzero vectors in radians, in `[0, π]`.
pub fn angle_between(a: Vec2, b: Vec2) -> f64 {
    let c = dot(a, b) / (norm(a) * norm(b));
    c.clamp(-1.0, 1.0).acos()
}

/// Wrap to `[0, 360)`.
pub fn wrap360(deg: f64) -> f64 {
    let d = deg.rem_euclid(360.0);
    if d >= 360.0 {
        0.0
    } else {
        d
    }
}

/// Wrap to `[-180, 180)`.
pub fn wrap180(deg: f64) -> f64 {
    wrap360(deg + 180.0) - 180.0
}

/// Heading of a vector (degrees clockwise from north).
pub fn heading_of(v: Vec2) -> f64 {
    wrap360(v[0].atan2(v[1]).to_degrees())
}

/// `(|v| sin Ψ, |v| cos Ψ)`.
pub fn velocity_components(heading_deg: f64, speed: f64) -> Vec2 {
    let r = heading_deg.to_radians();
    [speed * r.sin(), speed * r.cos()]
}

/// Closest point on segment `[a, b]` to `p` and its parameter in `[0, 1]`.
pub fn project_on_segment(p: Vec2, a: Vec2, b: Vec2) -> (Vec2, f64) {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    if len2 == 0.0 {
        return (a, 0.0);
    }
    let t = (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0);
    (add(a, scale(ab, t)), t)
}

/// Distance from `p` to a polyline (a single point counts as a polyline).
pub fn distance_to_polyline(p: Vec2, line: &[Vec2]) -> f64 {
    match line {
        [] => f64::INFINITY,
        [only] => norm(sub(p, *only)),
        _ => line
            .windows(2)
            .map(|w| norm(sub(p, project_on_segment(p, w[0], w[1]).0)))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Point `ahead` kilometres along the polyline past the point closest to
/// `p`, clamped at the polyline's end.
pub fn lookahead_point(p: Vec2, line: &[Vec2], ahead: f64) -> Vec2 {
    if line.len() < 2 {
        return line.first().copied().unwrap_or(p);
    }
    let mut best = (f64::INFINITY, 0usize, 0.0);
    for (k, w) in line.windows(2).enumerate() {
        let (q, t) = project_on_segment(p, w[0], w[1]);
        let d = norm(sub(p, q));
        if d < best.0 {
            best = (d, k, t);
        }
    }
    let (_, mut seg, t) = best;
    let mut pos = add(line[seg], scale(sub(line[seg + 1], line[seg]), t));
    let mut left = ahead;
    loop {
        let end = line[seg + 1];
        let d = norm(sub(end, pos));
        if d >= left {
            return add(pos, scale(unit(sub(end, pos)).unwrap_or([0.0, 0.0]), left));
        }
        left -= d;
        pos = end;
        seg += 1;
        if seg + 1 >= line.len() {
            return pos;
        }
    }
}

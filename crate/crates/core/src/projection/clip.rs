//! Convex polygon clipping against axis-aligned half-planes in the detector
//! frame, used to compute exact pixel/strip overlap areas.

pub(crate) type Point = (f64, f64);

/// Keeps the part of `poly` with `p.0 >= bound` (`keep_above`) or
/// `p.0 <= bound` (otherwise). One Sutherland–Hodgman step.
pub(crate) fn clip_t(poly: &[Point], bound: f64, keep_above: bool) -> Vec<Point> {
    let inside = |p: &Point| {
        if keep_above {
            p.0 >= bound
        } else {
            p.0 <= bound
        }
    };
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let cur = poly[i];
        let prev = poly[(i + poly.len() - 1) % poly.len()];
        let (cin, pin) = (inside(&cur), inside(&prev));
        if cin != pin {
            let s = (bound - prev.0) / (cur.0 - prev.0);
            out.push((bound, prev.1 + s * (cur.1 - prev.1)));
        }
        if cin {
            out.push(cur);
        }
    }
    out
}

/// Shoelace area (absolute).
pub(crate) fn area(poly: &[Point]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let (x0, y0) = poly[i];
        let (x1, y1) = poly[(i + 1) % poly.len()];
        acc += x0 * y1 - x1 * y0;
    }
    acc.abs() / 2.0
}

/// Area of `poly` lying in the strip `lo <= t <= hi`.
pub(crate) fn strip_area(poly: &[Point], lo: f64, hi: f64) -> f64 {
    let lower = clip_t(poly, lo, true);
    if lower.is_empty() {
        return 0.0;
    }
    area(&clip_t(&lower, hi, false))
}

/// Corners of the unit pixel centered at `(x, y)`, expressed as
/// `(t, u)` detector-frame coordinates for detector axis `(c, s)`.
pub(crate) fn pixel_in_detector_frame(x: f64, y: f64, c: f64, s: f64) -> [Point; 4] {
    let corners = [(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)];
    corners.map(|(dx, dy)| {
        let (px, py) = (x + dx, y + dy);
        (px * c + py * s, -px * s + py * c)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: [Point; 4] = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];

    #[test]
    fn unit_square_area() {
        assert_eq!(area(&SQUARE), 1.0);
    }

    #[test]
    fn strip_cuts() {
        assert_eq!(strip_area(&SQUARE, -1.0, 2.0), 1.0);
        assert!((strip_area(&SQUARE, 0.25, 0.75) - 0.5).abs() < 1e-15);
        assert_eq!(strip_area(&SQUARE, 2.0, 3.0), 0.0);
    }

    #[test]
    fn diamond_half() {
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let d = pixel_in_detector_frame(0.0, 0.0, c, c);
        assert!((area(&d) - 1.0).abs() < 1e-12);
        assert!((strip_area(&d, 0.0, 10.0) - 0.5).abs() < 1e-12);
        // triangle tip beyond t = 0.5: area = (0.7071 - 0.5)^2
        let tip = (c - 0.5) * (c - 0.5);
        assert!((strip_area(&d, 0.5, 10.0) - tip).abs() < 1e-12);
    }
}

//! Straight-line trajectories that bounce back and forth across a disk
//! cell centred on the base station.

/// Position at time `t` of a device that starts at `start` with velocity
/// `velocity` and reverses direction whenever it reaches the cell edge.
pub fn position_at(start: [f64; 2], velocity: [f64; 2], radius_m: f64, t_s: f64) -> [f64; 2] {
    let speed = velocity[0].hypot(velocity[1]);
    if speed == 0.0 || t_s <= 0.0 {
        return start;
    }
    let u = [velocity[0] / speed, velocity[1] / speed];
    // chord through `start` along u: s in [s_min, s_max]
    let b = start[0] * u[0] + start[1] * u[1];
    let c = start[0] * start[0] + start[1] * start[1] - radius_m * radius_m;
    let disc = (b * b - c).max(0.0).sqrt();
    let (s_min, s_max) = (-b - disc, -b + disc);
    let len = s_max - s_min;
    if len <= 0.0 {
        return start;
    }
    let travelled = (-s_min + speed * t_s).rem_euclid(2.0 * len);
    let along = if travelled <= len { travelled } else { 2.0 * len - travelled };
    let s = s_min + along;
    [start[0] + s * u[0], start[1] + s * u[1]]
}

/// 3-D distance to a base station at the origin, `height_m` above the
/// device plane.
pub fn distance_to_bs(pos: [f64; 2], height_m: f64) -> f64 {
    (pos[0] * pos[0] + pos[1] * pos[1] + height_m * height_m).sqrt()
}

pub const KMH_30: f64 = 30.0 / 3.6;

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: [f64; 2], b: [f64; 2]) -> bool {
        (a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9
    }

    #[test]
    fn bounces_between_edges() {
        // along the x axis from the centre of a 100 m cell at 10 m/s
        let p = |t| position_at([0.0, 0.0], [10.0, 0.0], 100.0, t);
        assert!(close(p(0.0), [0.0, 0.0]));
        assert!(close(p(5.0), [50.0, 0.0]));
        assert!(close(p(10.0), [100.0, 0.0]));
        assert!(close(p(15.0), [50.0, 0.0]));
        assert!(close(p(30.0), [-100.0, 0.0]));
        assert!(close(p(40.0), [0.0, 0.0]));
    }

    #[test]
    fn stays_inside() {
        for i in 0..500 {
            let t = i as f64 * 3.7;
            let q = position_at([30.0, -40.0], [KMH_30 * 0.6, KMH_30 * 0.8], 200.0, t);
            assert!(q[0].hypot(q[1]) <= 200.0 + 1e-9);
        }
    }

    #[test]
    fn stationary() {
        assert!(close(position_at([3.0, 4.0], [0.0, 0.0], 10.0, 99.0), [3.0, 4.0]));
        assert_eq!(distance_to_bs([3.0, 4.0], 0.0), 5.0);
    }
}

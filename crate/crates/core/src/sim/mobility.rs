//! Random-waypoint mobility.
//!
//! Each node walks toward a waypoint at a fixed speed, pauses on arrival,
//! then draws the next waypoint uniformly over the arena and a speed
//! uniformly from the configured range. Waypoint draws happen at fixed
//! tick times and consume nothing but the mobility stream, so the motion
//! of every node is identical across runs that share a seed, whatever the
//! radio traffic does.

use rand::Rng;

use crate::scenario::MobilityConfig;
use crate::types::{Position, SimTime};

/// Where one node is headed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MobilityState {
    /// Waiting at a waypoint until the given time.
    Paused { until: SimTime },
    /// Walking toward `waypoint` at `speed` meters per second.
    Moving { waypoint: Position, speed: f64 },
}

/// Draw a fresh waypoint and speed. The waypoint is drawn first, then the
/// speed; callers must not reorder the draws or seeded runs change.
pub fn draw_leg<R: Rng + ?Sized>(
    arena: (f64, f64),
    config: &MobilityConfig,
    rng: &mut R,
) -> MobilityState {
    let waypoint = Position::new(rng.gen_range(0.0..=arena.0), rng.gen_range(0.0..=arena.1));
    let speed = if config.speed_min == config.speed_max {
        config.speed_min
    } else {
        rng.gen_range(config.speed_min..=config.speed_max)
    };
    MobilityState::Moving { waypoint, speed }
}

/// Advance one node by `dt` seconds. A paused node whose pause has expired
/// draws its next leg; a moving node steps toward its waypoint and clamps
/// there (no overshoot), beginning its pause on arrival. A zero speed
/// leaves the position unchanged.
pub fn mobility_step<R: Rng + ?Sized>(
    position: &mut Position,
    state: &mut MobilityState,
    now: SimTime,
    dt: f64,
    arena: (f64, f64),
    config: &MobilityConfig,
    rng: &mut R,
) {
    if let MobilityState::Paused { until } = *state {
        if now < until {
            return;
        }
        *state = draw_leg(arena, config, rng);
    }
    let MobilityState::Moving { waypoint, speed } = *state else {
        return;
    };
    if speed <= 0.0 {
        return;
    }
    let distance = position.distance_to(&waypoint);
    let step = speed * dt;
    if step >= distance {
        *position = waypoint;
        *state = MobilityState::Paused {
            until: now + config.pause,
        };
        return;
    }
    position.x += (waypoint.x - position.x) / distance * step;
    position.y += (waypoint.y - position.y) / distance * step;
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn config() -> MobilityConfig {
        MobilityConfig {
            speed_min: 1.0,
            speed_max: 10.0,
            pause: 2.0,
            tick: 0.1,
        }
    }

    #[test]
    fn step_moves_along_the_unit_vector() {
        let mut pos = Position::new(0.0, 0.0);
        let mut state = MobilityState::Moving {
            waypoint: Position::new(30.0, 40.0),
            speed: 5.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        mobility_step(
            &mut pos,
            &mut state,
            0.0,
            1.0,
            (300.0, 300.0),
            &config(),
            &mut rng,
        );
        assert!((pos.x - 3.0).abs() < 1e-9, "{pos:?}");
        assert!((pos.y - 4.0).abs() < 1e-9, "{pos:?}");
    }

    #[test]
    fn arrival_clamps_at_the_waypoint_and_pauses() {
        let mut pos = Position::new(0.0, 0.0);
        let waypoint = Position::new(1.0, 0.0);
        let mut state = MobilityState::Moving {
            waypoint,
            speed: 10.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        mobility_step(
            &mut pos,
            &mut state,
            4.0,
            1.0,
            (300.0, 300.0),
            &config(),
            &mut rng,
        );
        assert_eq!(pos, waypoint);
        assert_eq!(state, MobilityState::Paused { until: 6.0 });
    }

    #[test]
    fn zero_speed_never_moves() {
        let mut pos = Position::new(7.0, 7.0);
        let mut state = MobilityState::Moving {
            waypoint: Position::new(100.0, 100.0),
            speed: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        mobility_step(
            &mut pos,
            &mut state,
            0.0,
            1.0,
            (300.0, 300.0),
            &config(),
            &mut rng,
        );
        assert_eq!(pos, Position::new(7.0, 7.0));
    }

    #[test]
    fn expired_pause_draws_a_new_leg_and_starts_walking() {
        let mut pos = Position::new(50.0, 50.0);
        let mut state = MobilityState::Paused { until: 3.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(1);

        // still paused: no draw, no motion
        mobility_step(
            &mut pos,
            &mut state,
            2.9,
            0.1,
            (300.0, 300.0),
            &config(),
            &mut rng,
        );
        assert_eq!(state, MobilityState::Paused { until: 3.0 });
        assert_eq!(pos, Position::new(50.0, 50.0));

        mobility_step(
            &mut pos,
            &mut state,
            3.0,
            0.1,
            (300.0, 300.0),
            &config(),
            &mut rng,
        );
        assert!(matches!(state, MobilityState::Moving { .. }), "{state:?}");
        assert_ne!(pos, Position::new(50.0, 50.0));
    }

    #[test]
    fn long_walks_stay_inside_the_arena() {
        let arena = (200.0, 100.0);
        let mut pos = Position::new(10.0, 10.0);
        let mut state = MobilityState::Paused { until: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = config();
        for i in 0..5000 {
            let now = i as f64 * cfg.tick;
            mobility_step(&mut pos, &mut state, now, cfg.tick, arena, &cfg, &mut rng);
            assert!((0.0..=arena.0).contains(&pos.x), "tick {i}: {pos:?}");
            assert!((0.0..=arena.1).contains(&pos.y), "tick {i}: {pos:?}");
        }
    }

    #[test]
    fn fixed_speed_range_needs_no_speed_draw() {
        let cfg = MobilityConfig {
            speed_min: 3.0,
            speed_max: 3.0,
            pause: 0.0,
            tick: 0.1,
        };
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = ChaCha8Rng::seed_from_u64(5);
        let leg = draw_leg((100.0, 100.0), &cfg, &mut a);
        let MobilityState::Moving { speed, .. } = leg else {
            panic!()
        };
        assert_eq!(speed, 3.0);
        // exactly two draws (waypoint x and y) were consumed
        let _: f64 = b.gen_range(0.0..=100.0);
        let _: f64 = b.gen_range(0.0..=100.0);
        assert_eq!(a.gen::<u64>(), b.gen::<u64>());
    }
}

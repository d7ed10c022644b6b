use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::DisturbanceError;
use crate::runtime::SimClock;

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyRecord {
    pub occupied: bool,
    /// Setpoint offset, K
    pub offset_k: f64,
    /// Occupants present
    pub count: f64,
    pub activities: Vec<(String, bool)>,
}

impl OccupancyRecord {
    pub fn activity(&self, name: &str) -> Option<bool> {
        self.activities.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn active_count(&self) -> usize {
        self.activities.iter().filter(|(_, v)| *v).count()
    }
}

/// An activity that may switch on for a whole daily window `[start_h, end_h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivitySpec {
    pub name: String,
    pub start_h: f64,
    pub end_h: f64,
    pub probability: f64,
    /// Scheduled appliances may run while nobody is home.
    pub scheduled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyParams {
    pub seed: u64,
    pub weekday_windows: Vec<(f64, f64)>,
    pub weekend_windows: Vec<(f64, f64)>,
    pub occupants: f64,
    pub occupied_offset_k: f64,
    pub unoccupied_offset_k: f64,
    pub activities: Vec<ActivitySpec>,
}

impl Default for OccupancyParams {
    fn default() -> Self {
        OccupancyParams {
            seed: 0,
            weekday_windows: vec![(0.0, 8.0), (17.0, 24.0)],
            weekend_windows: vec![(0.0, 24.0)],
            occupants: 3.0,
            occupied_offset_k: 0.0,
            unoccupied_offset_k: 2.0,
            activities: vec![
                ActivitySpec {
                    name: "cooking".into(),
                    start_h: 18.0,
                    end_h: 19.0,
                    probability: 0.8,
                    scheduled: false,
                },
                ActivitySpec {
                    name: "tv".into(),
                    start_h: 19.0,
                    end_h: 23.0,
                    probability: 0.6,
                    scheduled: false,
                },
                ActivitySpec {
                    name: "laundry".into(),
                    start_h: 10.0,
                    end_h: 11.0,
                    probability: 0.3,
                    scheduled: true,
                },
            ],
        }
    }
}

impl OccupancyParams {
    pub fn validate(&self) -> Result<(), DisturbanceError> {
        let win_ok = |w: &[(f64, f64)]| w.iter().all(|(a, b)| 0.0 <= *a && a <= b && *b <= 24.0);
        if !win_ok(&self.weekday_windows) || !win_ok(&self.weekend_windows) {
            return Err(DisturbanceError::InvalidParams("occupancy window outside 0..24".into()));
        }
        if !(self.occupants >= 0.0) {
            return Err(DisturbanceError::InvalidParams("negative occupant count".into()));
        }
        for a in &self.activities {
            if !(0.0..=1.0).contains(&a.probability) || !(0.0 <= a.start_h && a.start_h <= a.end_h && a.end_h <= 24.0) {
                return Err(DisturbanceError::InvalidParams(format!("activity '{}'", a.name)));
            }
        }
        Ok(())
    }
}

fn draw(seed: u64, day: i64, idx: usize) -> f64 {
    let mix =
        seed ^ (day as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (idx as u64 + 1).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    ChaCha8Rng::seed_from_u64(mix).random::<f64>()
}

/// Pure function of (params, wall time): each activity is drawn once per
/// day from a generator keyed on seed, day and activity index.
pub fn synth_occupancy(p: &OccupancyParams, clock: &SimClock) -> OccupancyRecord {
    let h = clock.hour_of_day();
    let windows = if clock.is_weekday() {
        &p.weekday_windows
    } else {
        &p.weekend_windows
    };
    let occupied = windows.iter().any(|(a, b)| h >= *a && h < *b);
    let day = clock.wall_time().and_utc().timestamp().div_euclid(86_400);
    let activities = p
        .activities
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let in_window = h >= a.start_h && h < a.end_h;
            let on = in_window && (occupied || a.scheduled) && draw(p.seed, day, i) < a.probability;
            (a.name.clone(), on)
        })
        .collect();
    OccupancyRecord {
        occupied,
        offset_k: if occupied {
            p.occupied_offset_k
        } else {
            p.unoccupied_offset_k
        },
        count: if occupied { p.occupants } else { 0.0 },
        activities,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn clock() -> SimClock {
        // a Wednesday
        let start = NaiveDate::from_ymd_opt(2025, 7, 30)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        SimClock::new(start, 900.0)
    }

    #[test]
    fn deterministic_per_step() {
        let p = OccupancyParams {
            seed: 17,
            ..Default::default()
        };
        let mut c = clock();
        for t in [0, 72, 74, 80] {
            c.t = t;
            assert_eq!(synth_occupancy(&p, &c), synth_occupancy(&p, &c));
        }
    }

    #[test]
    fn weekday_noon_unoccupied() {
        let mut c = clock();
        c.t = 48;
        let r = synth_occupancy(&OccupancyParams::default(), &c);
        assert!(!r.occupied);
        assert_eq!(r.count, 0.0);
    }

    #[test]
    fn zero_probability_never_fires() {
        let mut p = OccupancyParams::default();
        p.activities[0].probability = 0.0;
        let mut c = clock();
        for t in 0..10_000 {
            c.t = t;
            assert_eq!(synth_occupancy(&p, &c).activity("cooking"), Some(false));
        }
    }

    #[test]
    fn unscheduled_activity_implies_occupied() {
        let mut p = OccupancyParams::default();
        for a in &mut p.activities {
            a.probability = 1.0;
        }
        let mut c = clock();
        for t in 0..96 * 7 {
            c.t = t;
            let r = synth_occupancy(&p, &c);
            for (spec, (_, on)) in p.activities.iter().zip(&r.activities) {
                if *on && !spec.scheduled {
                    assert!(r.occupied);
                }
            }
        }
    }
}

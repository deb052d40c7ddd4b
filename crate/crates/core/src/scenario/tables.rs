//! Built-in task tables for the three experimental roads.
//!
//! Roads 1 and 2 share one 16-task table; road 3 has its own 15 tasks.
//!
//! Levels for roads 1-2: the published levels column only carries values on
//! every third row (rows 1, 4, 7, 10, 13, 16 read 2, 1, 1, 1, 2, 2), which do
//! not line up with the up/down tasks. Levels are attached only to
//! Volume/Airflow Up/Down rows, each taking the value printed on the nearest
//! row carrying one:
//!
//! | task | row             | nearest printed value | levels |
//! |------|-----------------|-----------------------|--------|
//! | 2    | Radio Volume Up | row 1: 2              | 2      |
//! | 6    | Heater Airflow Down | row 7: 1          | 1      |
//! | 12   | MP3 Volume Up   | row 13: 2             | 2      |
//! | 16   | A/C Airflow Up  | row 16: 2             | 2      |
//!
//! Every other row has levels 1. Correct this table if a cleaner source turns up.

use crate::menu::{Device, Mp3Mode, Outlet};

use super::{Control, Feature, RoadCondition};

/// (task no., location m, condition, device, feature, control, levels)
pub type TaskRow = (u16, f64, RoadCondition, Device, Feature, Control, u8);

use Control::{Down, On, Select, Up};
use Device::{Ac, Heater, Mp3, Radio};
use RoadCondition::{Accident, CutIn, Normal, SharpCurve, Tunnel};

pub const ROADS_1_2: [TaskRow; 16] = [
    (1, 100.0, Normal, Radio, Feature::Turn, On, 1),
    (2, 400.0, Normal, Radio, Feature::Volume, Up, 2),
    (3, 700.0, Normal, Ac, Feature::Turn, On, 1),
    (4, 1000.0, Accident, Ac, Feature::Outlet(Outlet::Top), Select, 1),
    (5, 1300.0, Normal, Heater, Feature::Turn, On, 1),
    (6, 1600.0, Normal, Heater, Feature::Airflow, Down, 1),
    (7, 1900.0, Accident, Mp3, Feature::Turn, On, 1),
    (8, 2200.0, Normal, Mp3, Feature::Mode(Mp3Mode::Mute), Select, 1),
    (9, 2500.0, Accident, Heater, Feature::Turn, On, 1),
    (10, 2800.0, Normal, Heater, Feature::Outlet(Outlet::Bottom), Select, 1),
    (11, 3100.0, Normal, Mp3, Feature::Turn, On, 1),
    (12, 3400.0, Accident, Mp3, Feature::Volume, Up, 2),
    (13, 3700.0, Normal, Radio, Feature::Turn, On, 1),
    (14, 4000.0, Normal, Radio, Feature::Channel(1), Select, 1),
    (15, 4300.0, Accident, Ac, Feature::Turn, On, 1),
    (16, 4600.0, Normal, Ac, Feature::Airflow, Up, 2),
];

pub const ROAD_3: [TaskRow; 15] = [
    (1, 900.0, Normal, Radio, Feature::Volume, Up, 2),
    (2, 1270.0, Normal, Mp3, Feature::Volume, Down, 3),
    (3, 1900.0, SharpCurve, Ac, Feature::Airflow, Up, 2),
    (4, 2900.0, SharpCurve, Heater, Feature::Airflow, Down, 1),
    (5, 3480.0, Normal, Radio, Feature::Channel(1), Select, 1),
    (6, 3850.0, Normal, Mp3, Feature::Mode(Mp3Mode::Mute), Select, 1),
    (7, 4230.0, SharpCurve, Ac, Feature::Outlet(Outlet::Top), Select, 1),
    (8, 4390.0, Normal, Radio, Feature::Volume, Down, 3),
    (9, 5310.0, CutIn, Mp3, Feature::Volume, Up, 2),
    (10, 5970.0, Tunnel, Heater, Feature::Airflow, Up, 3),
    (11, 6700.0, SharpCurve, Ac, Feature::Airflow, Down, 2),
    (12, 7350.0, Normal, Radio, Feature::Channel(2), Select, 1),
    (13, 9120.0, Normal, Mp3, Feature::Mode(Mp3Mode::Random), Select, 1),
    (14, 10530.0, Normal, Mp3, Feature::Volume, Up, 5),
    (15, 11110.0, SharpCurve, Heater, Feature::Outlet(Outlet::Bottom), Select, 1),
];

/// (from m, to m, lane) for road 3; the published overlap at 7300/7350 m
/// is resolved as a boundary at 7350 m.
pub const ROAD_3_LANES: [(f64, f64, u8); 3] = [(300.0, 3480.0, 2), (3850.0, 7350.0, 1), (7350.0, 11550.0, 2)];

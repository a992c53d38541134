use std::path::PathBuf;

use hcdr::io::{load_params, load_scenario, to_toml};
use hcdr_core::scenario::{Coordinate, Pulse};
use hcdr_core::{HcdrParams, ScenarioConfig};
use proptest::prelude::*;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

#[test]
fn shipped_params_are_the_reference_robot() {
    let p = load_params(&data("params.toml")).unwrap().value;
    assert_eq!(p, HcdrParams::reference());
    p.validate().unwrap();
}

#[test]
fn shipped_scenarios_are_the_reference_runs() {
    let s1 = load_scenario(&data("scenario1.toml")).unwrap().value;
    let s2 = load_scenario(&data("scenario2.toml")).unwrap().value;
    assert_eq!(s1, ScenarioConfig::reference_transfer());
    assert_eq!(s2, ScenarioConfig::reference_tracking());
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6f64..1e6, -1e-6f64..1e-6, Just(0.0), Just(2.22e-16)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn params_survive_a_toml_round_trip(mass in 0.001f64..100.0, g in finite(), anchor in prop::array::uniform3(finite()), i in 0usize..12) {
        let mut p = HcdrParams::reference();
        p.platform.mass = mass;
        p.gravity = g;
        p.cables.anchors[i].frame = nalgebra::Vector3::from(anchor);
        let back: HcdrParams = toml::from_str(&to_toml(&p)).unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn scenarios_survive_a_toml_round_trip(ts in 1e-5f64..1e-2, amp in finite(), start in 0.0f64..1.0, kp in prop::array::uniform7(finite()), on in any::<bool>()) {
        let mut s = ScenarioConfig::reference_tracking();
        s.sample_time = ts;
        s.control.kp = kp;
        s.control_on = on;
        s.plant_disturbances = Some(vec![Pulse { coordinate: Coordinate::Pitch, amplitude: amp, start, stop: start + 0.1 }]);
        let back: ScenarioConfig = toml::from_str(&to_toml(&s)).unwrap();
        prop_assert_eq!(back, s);
    }
}

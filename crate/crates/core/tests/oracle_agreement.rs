//! The ensemble oracle and the symbolic pathway enumeration must tell the
//! same story: every predicted emission shows up where and in which direction
//! it was predicted, and every strong feature of the record has a pathway.

use starkecho::ensemble::{self, ControlModel, EmissionRecord, SimulationSettings};
use starkecho::pathways::{enumerate_pathways, EchoPathway};
use starkecho::scenario::{bundled, Scenario};
use starkecho::Direction;

/// 80 % transfer per control, spin and optical decoherence off so that
/// every pathway stays well above the 1/N incoherent floor.
fn run(name: &str) -> (Scenario, Vec<EchoPathway>, EmissionRecord) {
    let mut s = bundled(name).unwrap();
    s.material.gamma13_khz = 0.0;
    s.material.gamma35_khz = 0.0;
    s.material.gamma_khz = 0.0;
    let seq = s.sequence().unwrap();
    let settings = SimulationSettings {
        n_ions: 20_000,
        control: ControlModel::AngleError { eta: 0.8 },
        grid_us: Some((1.0, 58.0)),
        ..s.simulation.clone()
    };
    let rec = ensemble::simulate(&seq, &s.scheme, &s.material, &settings).unwrap();
    let ps = enumerate_pathways(&seq, &s.scheme, &s.material);
    (s, ps, rec)
}

fn intensity(rec: &EmissionRecord, tr: &str, dir: Direction) -> Vec<f64> {
    rec.amplitude(tr, dir).unwrap().iter().map(|a| a.norm_sqr()).collect()
}

fn check_predicted_emissions_appear(name: &str) {
    let (_, ps, rec) = run(name);
    let step = rec.times_us[1] - rec.times_us[0];
    for p in ps.iter().filter(|p| p.is_detectable() && p.emission_time_us > rec.times_us[0] + step) {
        let dir = p.emission_direction().unwrap();
        let i = intensity(&rec, &p.emission_transition, dir);
        let mut sorted = i.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        let k0 = rec.times_us.iter().position(|&t| (t - p.emission_time_us).abs() < 0.5 * step).unwrap();
        let hit = (k0.saturating_sub(1)..=(k0 + 1).min(i.len() - 2))
            .any(|k| k > 0 && i[k] >= i[k - 1] && i[k] >= i[k + 1] && i[k] > 5.0 * median);
        assert!(hit, "{name}: {} at {} µs dir {} not found on '{}'", p.label, p.emission_time_us, dir, p.emission_transition);
    }
}

fn check_no_unexplained_peaks(name: &str) {
    let (_, ps, rec) = run(name);
    let step = rec.times_us[1] - rec.times_us[0];
    let se = ps.iter().find(|p| p.label.starts_with("SE")).unwrap();
    let se_dir = se.emission_direction().unwrap();
    let se_peak = intensity(&rec, "a", se_dir)
        .iter()
        .zip(&rec.times_us)
        .filter(|(_, t)| (*t - se.emission_time_us).abs() <= step)
        .map(|(v, _)| *v)
        .fold(0.0, f64::max);
    let n2 = (rec.meta.n_ions as f64).powi(2);
    let last = *rec.times_us.last().unwrap();
    for pk in ensemble::find_peaks(&rec, 0.0) {
        if pk.time_us <= rec.times_us[0] + step || pk.time_us >= last - step {
            continue;
        }
        if pk.intensity * n2 < 0.01 * se_peak {
            continue;
        }
        let explained = ps.iter().any(|p| {
            p.emission_transition == pk.transition
                && p.direction_sum == pk.direction.sign()
                && (p.emission_time_us - pk.time_us).abs() <= step + 1e-9
        });
        assert!(explained, "{name}: unexplained peak {pk:?}");
    }
}

#[test]
fn forward_predictions_appear_in_the_oracle() {
    check_predicted_emissions_appear("forward");
}

#[test]
fn backward_predictions_appear_in_the_oracle() {
    check_predicted_emissions_appear("backward");
}

#[test]
fn forward_record_has_no_unexplained_peaks() {
    check_no_unexplained_peaks("forward");
}

#[test]
fn backward_record_has_no_unexplained_peaks() {
    check_no_unexplained_peaks("backward");
}

#[test]
fn silenced_pathways_are_dark_in_the_oracle() {
    let (_, ps, rec) = run("forward");
    let se = ps.iter().find(|p| p.label.starts_with("SE")).unwrap();
    let w = |t: f64| (t - 0.5, t + 0.5);
    let se_i = ensemble::channel_intensity(&rec, "a", w(se.emission_time_us), Direction::Forward).unwrap();
    let p = ps.iter().find(|p| p.label == "4LE_023").unwrap();
    assert!(p.silencing_factor < 0.01);
    let i = ensemble::channel_intensity(&rec, "c", w(p.emission_time_us), Direction::Forward).unwrap();
    let open = ps.iter().find(|p| p.label == "4LE_056").unwrap();
    let j = ensemble::channel_intensity(&rec, "c", w(open.emission_time_us), Direction::Forward).unwrap();
    assert!(i < 0.05 * j, "4LE_023 {i:.3e} vs 4LE_056 {j:.3e} (SE {se_i:.3e})");
}

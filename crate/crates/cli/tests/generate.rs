use gaugekit_cli::parse_spec;
use nalgebra::DVector;

fn spec_with_noise(noise: &str) -> String {
    format!(
        r#"{{
  "family": {{ "tag": "L1Ball", "n": 6 }},
  "phi": {{ "kind": "gaussian", "m": 3, "seed": 2 }},
  "fit": {{ "kind": "squared_l2", "y_gen": {{
    "ground_truth": {{ "kind": "atoms", "atoms": [
      {{ "kind": "index", "index": 0, "weight": 1.5 }},
      {{ "kind": "index", "index": 7, "weight": 0.5 }} ] }},
    "noise": {noise},
    "seed": 9 }} }}
}}"#
    )
}

fn resolve(noise: &str) -> (Vec<f64>, Vec<f64>, DVector<f64>) {
    let mut spec = parse_spec(&spec_with_noise(noise)).unwrap();
    spec.resolve().unwrap();
    let n = 6;
    let phi = spec.operator(n).unwrap();
    let u = spec.u_true.clone().unwrap();
    let z = phi.apply(&DVector::from_column_slice(&u)).unwrap();
    (spec.fit.y.unwrap(), u, z)
}

#[test]
fn noiseless_measurements_are_exact() {
    let (y, u, z) = resolve(r#"{ "kind": "none" }"#);
    assert_eq!(y, z.as_slice());
    // atom 0 is +e_0, atom 7 is -e_3
    assert_eq!(u, vec![1.5, 0.0, 0.0, -0.5, 0.0, 0.0]);
}

#[test]
fn zero_sigma_matches_noiseless() {
    let (a, _, _) = resolve(r#"{ "kind": "none" }"#);
    let (b, _, _) = resolve(r#"{ "kind": "gaussian", "sigma": 0.0 }"#);
    assert_eq!(a, b);
}

#[test]
fn gaussian_noise_is_seeded() {
    let (a, _, z) = resolve(r#"{ "kind": "gaussian", "sigma": 0.1 }"#);
    let (b, _, _) = resolve(r#"{ "kind": "gaussian", "sigma": 0.1 }"#);
    assert_eq!(a, b);
    assert_ne!(a, z.as_slice());
}

#[test]
fn quantized_measurements_sit_on_midpoints() {
    let (y, _, _) = resolve(r#"{ "kind": "quantize", "levels": 8, "step": 0.25 }"#);
    for v in y {
        let k = v / 0.25 - 0.5;
        assert!((k - k.round()).abs() < 1e-12 && (-4.0..=3.0).contains(&k), "{v}");
    }
}

#[test]
fn out_of_range_atom_index_names_the_field() {
    let text = spec_with_noise(r#"{ "kind": "none" }"#).replace("\"index\": 7", "\"index\": 12");
    let mut spec = parse_spec(&text).unwrap();
    let err = spec.resolve().unwrap_err();
    assert_eq!(err.path, "fit.y_gen.ground_truth.atoms[1]");
}

use gaugekit_web::{gtv1d_fit_view, l1_representer_view, tv_lmo_view};

#[test]
fn tv_lmo_finds_negative_block() {
    // a negative 2x2 block in a 4x4 grid
    let mut g = vec![0.1; 16];
    for c in [5, 6, 9, 10] {
        g[c] = -1.0;
    }
    let v = tv_lmo_view(4, 4, &g).unwrap();
    assert_eq!(v.sign, 1);
    assert_eq!(v.cells, vec![5, 6, 9, 10]);
    assert_eq!(v.perimeter, 8);
    assert!((v.ratio - 0.5).abs() < 1e-12);
}

#[test]
fn tv_lmo_rejects_wrong_length() {
    assert!(tv_lmo_view(3, 3, &[1.0; 8]).is_err());
}

#[test]
fn gtv_fit_has_single_jump() {
    let v = gtv1d_fit_view(10, &[1, 3, 6, 8], &[0.0, 0.0, 2.0, 2.0], 0.1).unwrap();
    assert!(v.bound_met);
    assert_eq!(v.jumps.len(), 1);
    assert!((v.jumps[0].height - 1.9).abs() < 1e-8);
    assert!((3..6).contains(&v.jumps[0].at));
    assert_eq!(v.u.len(), 10);
}

#[test]
fn gtv_fit_checks_lengths() {
    assert!(gtv1d_fit_view(10, &[1, 2], &[0.0], 0.1).is_err());
}

#[test]
fn l1_representer_respects_bound() {
    let v = l1_representer_view(6, 50, 3, 0.05, 4).unwrap();
    assert!(v.bound_met);
    assert!(v.spikes.len() <= 6);
    assert_eq!(v.truth.iter().filter(|x| **x != 0.0).count(), 3);
    assert!(l1_representer_view(6, 5, 9, 0.05, 4).is_err());
}

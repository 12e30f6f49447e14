use qopsim::cdn::BandwidthWaveform;
use qopsim::workload::{generate_catalog, generate_population, CatalogSpec, PopulationSpec, WaveformSpec};

#[test]
fn generators_are_seed_deterministic() {
    let spec = CatalogSpec { items: 5_000, ..Default::default() };
    let (a, b) = (generate_catalog(&spec, 9).unwrap(), generate_catalog(&spec, 9).unwrap());
    assert_eq!(a.items, b.items);
    assert_eq!(a.sample_requests(1000, 1).unwrap(), b.sample_requests(1000, 1).unwrap());
    assert_ne!(a.sample_requests(1000, 1).unwrap(), a.sample_requests(1000, 2).unwrap());

    let pop = PopulationSpec { users: 500, ..Default::default() };
    let (p, q) = (generate_population(&pop, 3).unwrap(), generate_population(&pop, 3).unwrap());
    assert_eq!(p.users, q.users);
    assert_eq!(p.network, q.network);
    let shares: f64 = p.portrait_shares(&pop).iter().sum();
    assert!((shares - 1.0).abs() < 1e-9);
}

#[test]
fn calibrated_catalog_hits_head_mass() {
    let c = generate_catalog(&CatalogSpec { items: 20_000, ..Default::default() }, 1).unwrap();
    assert!(c.calibrated);
    assert!((c.head_mass - 0.70).abs() < 0.01, "{}", c.head_mass);
}

#[test]
fn shipped_month_roundtrips_through_csv() {
    let w = WaveformSpec::shipped_month().generate(4).unwrap();
    assert_eq!(w.days(), 30);
    let mut buf = Vec::new();
    w.write_csv(&mut buf).unwrap();
    let back = BandwidthWaveform::read_csv(buf.as_slice(), w.slot_minutes, w.slots_per_day).unwrap();
    assert_eq!(back.mbps, w.mbps);
}

use std::path::Path;

use groupiv_spectra::ensemble::{sample_emitters, EnsembleConfig};
use groupiv_spectra::io::{emitters_to_csv, parse_emitters_csv, parse_resonances_csv, parse_scan_csv, write_text};
use groupiv_spectra::units::AtomicMass;
use groupiv_spectra::vibmodel::{isotope_shift, ElectronicState, IsotopeTable, Mode, VibrationalModel};
use groupiv_spectra::Error;

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn force_constant_csv_matches_builtin_model() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(
        tmp.path(),
        "k.csv",
        "mode,state,k_hartree_per_bohr2\neu,excited,0.435863\na2u,ground,0.317201\neu,ground,0.418695\na2u,excited,0.386091\n",
    );
    let tin = IsotopeTable::tin();
    let model = VibrationalModel::from_csv(&p, tin.mass(119).unwrap()).unwrap();
    let builtin = VibrationalModel::snv_table1();
    for mode in [Mode::A2u, Mode::Eu] {
        for state in [ElectronicState::Ground, ElectronicState::Excited] {
            assert_eq!(model.force_constant(mode, state), builtin.force_constant(mode, state));
        }
    }
    let (m119, m120) = (tin.mass(119).unwrap(), tin.mass(120).unwrap());
    assert_eq!(isotope_shift(&model, m119, m120).unwrap(), isotope_shift(&builtin, m119, m120).unwrap());
}

#[test]
fn force_constant_csv_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let m = AtomicMass::nominal(119);
    let missing = write(tmp.path(), "a.csv", "mode,state,k_hartree_per_bohr2\neu,excited,0.4\n");
    assert!(VibrationalModel::from_csv(&missing, m).is_err());
    let bad = write(tmp.path(), "b.csv", "mode,state,k_hartree_per_bohr2\neu,excited,0.4\neu,ground,x\na2u,ground,0.3\na2u,excited,0.3\n");
    assert!(matches!(VibrationalModel::from_csv(&bad, m), Err(Error::Parse { line: 3, .. })));
}

#[test]
fn isotope_table_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(
        tmp.path(),
        "ge.csv",
        "mass_number,atomic_mass_u,abundance\n70,69.924249,0.2057\n72,71.922076,0.2745\n73,72.923459,0.0775\n74,73.921178,0.3650\n76,75.921403,0.0773\n",
    );
    let ge = IsotopeTable::from_csv(&p, "Ge").unwrap();
    assert_eq!(ge.entries.len(), 5);
    assert_eq!(ge.mass(74).unwrap().atomic_mass_u, 73.921178);
    assert!(matches!(ge.mass(71), Err(Error::UnknownIsotope(71))));

    let bad = write(tmp.path(), "bad.csv", "mass_number,atomic_mass_u,abundance\n70,75.0,0.2\n");
    assert!(IsotopeTable::from_csv(&bad, "Ge").is_err());
}

#[test]
fn emitter_list_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = EnsembleConfig::snv_default();
    cfg.emitter_count = 25;
    cfg.position_box_um = Some([20.0, 20.0, 3.0]);
    let emitters = sample_emitters(&cfg).unwrap();
    let p = tmp.path().join("emitters.csv");
    write_text(&p, &emitters_to_csv(&emitters)).unwrap();
    let back = parse_emitters_csv(&p, &cfg.isotope_table).unwrap();
    assert_eq!(back, emitters);
    assert_eq!(emitters_to_csv(&back), std::fs::read_to_string(&p).unwrap());
}

#[test]
fn scan_csv_rules() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = write(tmp.path(), "ok.csv", "# reference_thz=484.130\nfrequency_offset_ghz,counts\n-0.1,3\n0.1,4\n");
    let s = parse_scan_csv(&ok).unwrap();
    assert_eq!((s.len(), s.reference_thz), (2, Some(484.130)));
    let unsorted = write(tmp.path(), "u.csv", "frequency_offset_ghz,counts\n0.1,3\n-0.1,4\n");
    assert!(parse_scan_csv(&unsorted).is_err());
    let no_header = write(tmp.path(), "h.csv", "0.1,3\n");
    assert!(parse_scan_csv(&no_header).is_err());
    assert!(matches!(parse_scan_csv(&tmp.path().join("missing.csv")), Err(Error::Io { .. })));
}

#[test]
fn resonance_list_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(tmp.path(), "r.csv", "center_ghz,fwhm_mhz,amplitude\n0.0,35,1\n0.004,38,0.9\n");
    let list = parse_resonances_csv(&p).unwrap();
    assert_eq!(list.len(), 2);
    assert_eq!(list[1].fwhm_mhz, 38.0);
    let bad = write(tmp.path(), "b.csv", "center_ghz,fwhm_mhz,amplitude\n0.0,35\n");
    assert!(parse_resonances_csv(&bad).is_err());
}

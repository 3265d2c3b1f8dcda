use std::path::{Path, PathBuf};

use compfem::krylov::{KspType, MonitorSink};
use compfem::nonlinear::NewtonOptions;
use compfem::options::{build_ksp, BuildCtx, OptionsDb};
use proptest::prelude::*;

/// Corpus file and the number of fields of the operator it is meant for.
const CORPUS: &[(&str, usize)] = &[
    ("poisson_hypre", 1),
    ("poisson_schwarz", 1),
    ("poisson_sor", 1),
    ("ns_pcd", 2),
    ("ns_direct", 2),
    ("stokes_mass", 2),
    ("rb_direct", 3),
    ("rb_iterative", 3),
];

fn corpus_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("options").join(format!("{name}.opts"))
}

fn quiet() -> BuildCtx {
    BuildCtx { monitor: MonitorSink::buffer().0 }
}

/// Everything the drivers read from a database: Newton settings plus the solver tree.
fn view(db: &OptionsDb, nfields: usize) -> String {
    NewtonOptions::from_options(db).unwrap();
    build_ksp(db, "", Some(nfields), &quiet()).unwrap().view_string()
}

#[test]
fn every_corpus_file_builds_without_leftovers() {
    for &(name, nf) in CORPUS {
        let db = OptionsDb::parse_file(&corpus_path(name)).unwrap();
        assert!(!db.is_empty(), "{name}");
        view(&db, nf);
        assert!(db.unused().is_empty(), "{name}: unused {:?}", db.unused());
    }
}

#[test]
fn views_match_the_golden_files() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden");
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for &(name, nf) in CORPUS {
        let db = OptionsDb::parse_file(&corpus_path(name)).unwrap();
        let got = view(&db, nf);
        let path = dir.join(format!("{name}.view"));
        if update {
            std::fs::create_dir_all(&dir).unwrap();
            std::fs::write(&path, &got).unwrap();
            continue;
        }
        let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(got, want, "{name}: view differs from {}", path.display());
    }
}

#[test]
fn building_twice_is_deterministic() {
    for &(name, nf) in CORPUS {
        let db = OptionsDb::parse_file(&corpus_path(name)).unwrap();
        assert_eq!(view(&db, nf), view(&db, nf), "{name}");
    }
}

#[test]
fn direct_listing_gives_a_direct_tree() {
    let db = OptionsDb::parse_file(&corpus_path("rb_direct")).unwrap();
    let ksp = build_ksp(&db, "", Some(3), &quiet()).unwrap();
    assert_eq!(ksp.ksp_type(), KspType::Preonly);
    assert_eq!(ksp.pc().type_name(), "lu");
}

#[test]
fn iterative_rb_listing_is_a_multiplicative_split() {
    let db = OptionsDb::parse_file(&corpus_path("rb_iterative")).unwrap();
    let ksp = build_ksp(&db, "", Some(3), &quiet()).unwrap();
    assert_eq!(ksp.ksp_type(), KspType::Fgmres);
    assert_eq!(ksp.pc().type_name(), "fieldsplit");
    let v = ksp.view_string();
    assert!(v.contains("MULTIPLICATIVE"), "{v}");
    assert!(v.contains("Split number 0 Fields 0, 1"), "{v}");
    assert!(v.contains("Split number 1 Fields 2"), "{v}");
    assert!(v.contains("pcd"), "{v}");
}

#[test]
fn prefix_stack_and_flags() {
    let db = OptionsDb::parse_args(["-ksp_type", "cg", "-ksp_rtol", "1e-8"]).unwrap();
    assert_eq!(db.get("ksp_type"), Some("cg"));
    assert_eq!(db.get("ksp_rtol"), Some("1e-8"));
    let db = OptionsDb::parse_args(["-prefix_push", "a_", "-x", "1", "-prefix_pop", "-x", "2"]).unwrap();
    assert_eq!(db.get("a_x"), Some("1"));
    assert_eq!(db.get("x"), Some("2"));
    let db = OptionsDb::parse_args(["-flag", "-k", "v"]).unwrap();
    assert_eq!(db.get("flag"), Some("true"));
    assert_eq!(db.get("k"), Some("v"));
}

#[test]
fn typed_lookups() {
    let db = OptionsDb::parse_args(["-pcd_Mp_ksp_max_it", "2", "-tol", "1e-4"]).unwrap();
    assert_eq!(db.get_int("pcd_Mp_", "ksp_max_it", 7).unwrap(), 2);
    assert_eq!(db.get_int("pcd_Kp_", "ksp_max_it", 7).unwrap(), 7);
    assert_eq!(db.get_real("", "tol", 0.0).unwrap(), 1e-4);
    let bad = OptionsDb::parse_args(["-fieldsplit_0_ksp_max_it", "lots"]).unwrap();
    let err = bad.get_int("fieldsplit_0_", "ksp_max_it", 1).unwrap_err();
    assert!(err.to_string().contains("fieldsplit_0_ksp_max_it"), "{err}");
}

fn key() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,12}"
}

fn value() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-z][a-z0-9_.+]{0,8}",
        (-1e6f64..1e6).prop_map(|v| format!("{v:e}")),
        (0usize..1000).prop_map(|v| v.to_string())
    ]
}

proptest! {
    #[test]
    fn render_round_trips(entries in proptest::collection::vec((key(), value()), 0..20)) {
        let mut db = OptionsDb::new();
        for (k, v) in &entries {
            db.set(k, v);
        }
        let back = OptionsDb::parse_str(&db.render()).unwrap();
        let a: Vec<(&str, &str)> = db.iter().collect();
        let b: Vec<(&str, &str)> = back.iter().collect();
        prop_assert_eq!(a, b);
    }
}

use super::OptionsDb;
use crate::error::{Error, Result};
use crate::krylov::{Ksp, KspType, MonitorSink, Orthogonalization, Side};
use crate::precond::{
    AssembledPc, FieldSplitPc, Ilu0Pc, JacobiPc, KspPc, LuPc, MassPc, NonePc, PcdBcVariant, PcdPc, Preconditioner,
    SchurFactType, SchwarzPc, SorPc, SplitKind,
};

/// Settings shared by every solver in one tree.
#[derive(Debug, Clone)]
pub struct BuildCtx {
    /// Destination of `-ksp_monitor` lines.
    pub monitor: MonitorSink,
}

impl Default for BuildCtx {
    fn default() -> Self {
        BuildCtx { monitor: MonitorSink::Stdout }
    }
}

const PC_TYPES: [&str; 15] = [
    "none",
    "jacobi",
    "sor",
    "ilu",
    "lu",
    "assembled",
    "ksp",
    "telescope",
    "fieldsplit",
    "pcd",
    "mass",
    "schwarz",
    "hypre",
    "gamg",
    "mumps",
];

/// External algebraic multigrid types and what stands in for them.
const AMG_SUBSTITUTES: [&str; 3] = ["lu", "sor", "jacobi"];

#[derive(Clone, Copy)]
struct Defaults {
    ksp: KspType,
    pc: &'static str,
}

const OUTER: Defaults = Defaults { ksp: KspType::Gmres, pc: "none" };
const DIRECT: Defaults = Defaults { ksp: KspType::Preonly, pc: "lu" };

/// Build the KSP (and its entire preconditioner tree) configured under
/// `prefix`. `nfields` is the number of fields of the operator it will
/// solve, when known; fieldsplit without explicit splits needs it.
pub fn build_ksp(db: &OptionsDb, prefix: &str, nfields: Option<usize>, ctx: &BuildCtx) -> Result<Ksp> {
    ksp_at(db, prefix, nfields, ctx, 0, OUTER)
}

/// Just the preconditioner configured under `prefix`.
pub fn build_pc(
    db: &OptionsDb,
    prefix: &str,
    nfields: Option<usize>,
    ctx: &BuildCtx,
) -> Result<Box<dyn Preconditioner>> {
    pc_at(db, prefix, nfields, ctx, 0, "none")
}

fn ksp_at(
    db: &OptionsDb,
    prefix: &str,
    nfields: Option<usize>,
    ctx: &BuildCtx,
    depth: usize,
    def: Defaults,
) -> Result<Ksp> {
    let name = db.get_enum(prefix, "ksp_type", &KspType::NAMES, def.ksp.name())?;
    let kind = KspType::parse(&name)?;
    let mut ksp = Ksp::new(kind).with_prefix(prefix).with_depth(depth);
    ksp.rtol = db.get_real(prefix, "ksp_rtol", ksp.rtol)?;
    ksp.atol = db.get_real(prefix, "ksp_atol", ksp.atol)?;
    ksp.max_it = db.get_int(prefix, "ksp_max_it", ksp.max_it)?;
    ksp.restart = db.get_int(prefix, "ksp_gmres_restart", ksp.restart)?.max(1);
    if db.get_bool(prefix, "ksp_gmres_modifiedgramschmidt", false)? {
        ksp.orthogonalization = Orthogonalization::Modified;
    }
    if db.get_bool(prefix, "ksp_gmres_classicalgramschmidt", false)? {
        ksp.orthogonalization = Orthogonalization::Classical;
    }
    let default_side = if ksp.side == Side::Right { "right" } else { "left" };
    ksp.side = match db.get_enum(prefix, "ksp_pc_side", &["left", "right"], default_side)?.as_str() {
        "right" => Side::Right,
        _ => Side::Left,
    };
    if kind == KspType::Fgmres && ksp.side == Side::Left {
        return Err(Error::Options {
            key: format!("{prefix}ksp_pc_side"),
            msg: "fgmres supports only right preconditioning".into(),
        });
    }
    if kind == KspType::Cg && ksp.side == Side::Right {
        return Err(Error::Options {
            key: format!("{prefix}ksp_pc_side"),
            msg: "cg supports only left preconditioning".into(),
        });
    }
    ksp.richardson_scale = db.get_real(prefix, "ksp_richardson_scale", 1.0)?;
    ksp.error_if_not_converged = db.get_bool(prefix, "ksp_error_if_not_converged", false)?;
    ksp.initial_guess_nonzero = db.get_bool(prefix, "ksp_initial_guess_nonzero", false)?;
    ksp.compute_true_residual = depth == 0;
    if db.get_bool(prefix, "ksp_monitor", false)? {
        ksp = ksp.with_monitor(ctx.monitor.clone());
    }
    // reporting switches read by the drivers
    db.get(&format!("{prefix}ksp_view"));
    db.get(&format!("{prefix}ksp_converged_reason"));
    let pc = pc_at(db, prefix, nfields, ctx, depth, def.pc)?;
    Ok(ksp.with_pc(pc))
}

fn shared(
    db: &OptionsDb,
    prefix: &str,
    nfields: Option<usize>,
    ctx: &BuildCtx,
    depth: usize,
    def: Defaults,
) -> Result<crate::krylov::SharedKsp> {
    Ok(ksp_at(db, prefix, nfields, ctx, depth + 1, def)?.into_shared())
}

fn mat_type(db: &OptionsDb, prefix: &str, default: &str) -> Result<bool> {
    Ok(db.get_enum(prefix, "mat_type", &["aij", "matfree", "seqaij"], default)? == "matfree")
}

fn pc_at(
    db: &OptionsDb,
    prefix: &str,
    nfields: Option<usize>,
    ctx: &BuildCtx,
    depth: usize,
    default: &str,
) -> Result<Box<dyn Preconditioner>> {
    let key = format!("{prefix}pc_type");
    let name = db.get(&key).unwrap_or(default).to_lowercase();
    let p = prefix;
    Ok(match name.as_str() {
        "none" => Box::new(NonePc { prefix: p.to_string() }),
        "jacobi" => Box::new(JacobiPc::new(p)),
        "sor" => Box::new(SorPc::new(p, db.get_real(p, "pc_sor_omega", 1.0)?, db.get_int(p, "pc_sor_its", 1)?.max(1))),
        "ilu" => {
            let levels = db.get_int(p, "pc_factor_levels", 0)?;
            if levels != 0 {
                return Err(Error::Options {
                    key: format!("{p}pc_factor_levels"),
                    msg: "only ILU(0) is available".into(),
                });
            }
            Box::new(Ilu0Pc::new(p))
        }
        "lu" | "mumps" | "cholesky" => {
            // which external package would factor is irrelevant here
            db.get(&format!("{p}pc_factor_mat_solver_package"));
            db.get(&format!("{p}pc_factor_mat_solver_type"));
            Box::new(LuPc::new(p))
        }
        "hypre" | "gamg" => {
            db.consume_prefix(&format!("{p}pc_hypre_"));
            db.consume_prefix(&format!("{p}pc_gamg_"));
            db.consume_prefix(&format!("{p}pc_mg_"));
            let orig: &'static str = if name == "hypre" { "hypre" } else { "gamg" };
            match db.get_enum("", "amg_substitute", &AMG_SUBSTITUTES, "lu")?.as_str() {
                "sor" => Box::new(SorPc::new(p, 1.0, 1).standing_in_for(orig)),
                "jacobi" => Box::new(JacobiPc::new(p)),
                _ => Box::new(LuPc::new(p).standing_in_for(orig)),
            }
        }
        "assembled" => {
            let inner_prefix = format!("{p}assembled_");
            if mat_type(db, &inner_prefix, "aij")? {
                return Err(Error::Options {
                    key: format!("{inner_prefix}mat_type"),
                    msg: "assembled pc needs aij".into(),
                });
            }
            let inner = pc_at(db, &inner_prefix, nfields, ctx, depth, "lu")?;
            Box::new(AssembledPc::new(p, inner))
        }
        "ksp" => {
            let inner = shared(db, &format!("{p}ksp_"), nfields, ctx, depth, OUTER)?;
            Box::new(KspPc::new(p, "ksp", inner))
        }
        "telescope" => {
            db.consume_prefix(&format!("{p}pc_telescope_"));
            let inner = shared(db, &format!("{p}telescope_"), nfields, ctx, depth, DIRECT)?;
            Box::new(KspPc::new(p, "telescope", inner))
        }
        "fieldsplit" => fieldsplit(db, p, nfields, ctx, depth)?,
        "pcd" => {
            let mp = shared(db, &format!("{p}pcd_mp_"), Some(1), ctx, depth, DIRECT)?;
            let kp = shared(db, &format!("{p}pcd_kp_"), Some(1), ctx, depth, DIRECT)?;
            let flags = [
                mat_type(db, &format!("{p}pcd_mp_"), "aij")?,
                mat_type(db, &format!("{p}pcd_kp_"), "aij")?,
                mat_type(db, &format!("{p}pcd_fp_"), "matfree")?,
            ];
            let variant = db.get_enum(p, "pcd_bc_variant", &PcdBcVariant::NAMES, "pin")?;
            let variant = PcdBcVariant::parse(&variant).expect("validated");
            Box::new(PcdPc::new(p, mp, kp, flags, variant))
        }
        "mass" => Box::new(MassPc::new(p, shared(db, &format!("{p}mass_"), Some(1), ctx, depth, DIRECT)?)),
        "schwarz" => {
            db.get_enum(p, "schwarz_composite_type", &["additive"], "additive")?;
            let save = db.get_bool(p, "schwarz_patch_save_operators", true)?;
            db.get_enum(p, "schwarz_patch_sub_mat_type", &["seqaij", "aij", "dense"], "seqaij")?;
            db.get_enum(p, "schwarz_patch_ksp_type", &["preonly"], "preonly")?;
            db.get_enum(p, "schwarz_patch_pc_type", &["lu"], "lu")?;
            let coarse = shared(db, &format!("{p}schwarz_coarse_"), nfields, ctx, depth, DIRECT)?;
            Box::new(SchwarzPc::new(p, coarse, save))
        }
        _ => return Err(Error::UnknownType { kind: "PC", name, known: PC_TYPES.to_vec() }),
    })
}

fn fieldsplit(
    db: &OptionsDb,
    p: &str,
    nfields: Option<usize>,
    ctx: &BuildCtx,
    depth: usize,
) -> Result<Box<dyn Preconditioner>> {
    let kind_name = db.get_enum(p, "pc_fieldsplit_type", &SplitKind::NAMES, "multiplicative")?;
    let kind = match kind_name.as_str() {
        "additive" => SplitKind::Additive,
        "multiplicative" => SplitKind::Multiplicative,
        _ => {
            let f = db.get_enum(p, "pc_fieldsplit_schur_fact_type", &SchurFactType::NAMES, "full")?;
            db.get_enum(p, "pc_fieldsplit_schur_precondition", &["a11"], "a11")?;
            SplitKind::Schur(SchurFactType::parse(&f).expect("validated"))
        }
    };
    let mut splits = Vec::new();
    while let Some(fields) = db.get_usize_list(p, &format!("pc_fieldsplit_{}_fields", splits.len()))? {
        if fields.is_empty() {
            return Err(Error::Options {
                key: format!("{p}pc_fieldsplit_{}_fields", splits.len()),
                msg: "empty split".into(),
            });
        }
        splits.push(fields);
    }
    let (splits, sizes): (Option<Vec<Vec<usize>>>, Vec<usize>) = if splits.is_empty() {
        let n = nfields.ok_or_else(|| Error::MissingFields {
            prefix: p.to_string(),
            msg: "no pc_fieldsplit_<i>_fields given and the number of fields is unknown".into(),
        })?;
        (None, vec![1; n])
    } else {
        let sizes = splits.iter().map(Vec::len).collect();
        (Some(splits), sizes)
    };
    if let (SplitKind::Schur(_), n) = (kind, sizes.len()) {
        if n != 2 {
            return Err(Error::MissingFields {
                prefix: p.to_string(),
                msg: format!("schur needs exactly 2 splits, got {n}"),
            });
        }
    }
    let mut ksps = Vec::with_capacity(sizes.len());
    for (i, &nf) in sizes.iter().enumerate() {
        ksps.push(shared(db, &format!("{p}fieldsplit_{i}_"), Some(nf), ctx, depth, DIRECT)?);
    }
    let inner_prefix = format!("{p}fieldsplit_1_inner_");
    let schur_inner = match kind {
        SplitKind::Schur(_) if db.has_prefix(&inner_prefix) => {
            Some(shared(db, &inner_prefix, Some(sizes[0]), ctx, depth, DIRECT)?)
        }
        _ => None,
    };
    Ok(Box::new(FieldSplitPc::new(p, kind, splits, ksps, schur_inner)?))
}

/// Recognised keys, per component, for `-help`.
pub fn help_text() -> String {
    let sections: [(&str, &[&str]); 12] = [
        (
            "KSP (<p>)",
            &[
                "ksp_type {cg,gmres,fgmres,richardson,preonly}",
                "ksp_rtol <real>",
                "ksp_atol <real>",
                "ksp_max_it <int>",
                "ksp_gmres_restart <int>",
                "ksp_gmres_modifiedgramschmidt",
                "ksp_pc_side {left,right}",
                "ksp_richardson_scale <real>",
                "ksp_monitor",
                "ksp_error_if_not_converged",
                "ksp_initial_guess_nonzero",
                "ksp_view",
                "ksp_converged_reason",
            ],
        ),
        (
            "PC (<p>)",
            &["pc_type {none,jacobi,sor,ilu,lu,assembled,ksp,telescope,fieldsplit,pcd,mass,schwarz,hypre,gamg,mumps}"],
        ),
        ("sor", &["pc_sor_omega <real>", "pc_sor_its <int>"]),
        ("ilu / lu", &["pc_factor_levels 0", "pc_factor_mat_solver_package <name> (accepted, ignored)"]),
        (
            "hypre / gamg",
            &["pc_hypre_* / pc_gamg_* (accepted, ignored)", "amg_substitute {lu,sor,jacobi} (global; default lu)"],
        ),
        ("assembled", &["assembled_mat_type aij", "assembled_pc_type <pc> and any assembled_<pc option>"]),
        ("ksp", &["ksp_<ksp options> for the inner solver"]),
        (
            "telescope",
            &["pc_telescope_reduction_factor <int> (ignored)", "telescope_<ksp options> (default preonly + lu)"],
        ),
        (
            "fieldsplit",
            &[
                "pc_fieldsplit_type {additive,multiplicative,schur}",
                "pc_fieldsplit_<i>_fields <int,int,...>",
                "pc_fieldsplit_schur_fact_type {diag,lower,upper,full}",
                "pc_fieldsplit_schur_precondition a11",
                "fieldsplit_<i>_<ksp options>",
                "fieldsplit_1_inner_<ksp options> (A00 solve inside S; defaults to the split 0 solver)",
            ],
        ),
        (
            "pcd",
            &[
                "pcd_mp_<ksp options>",
                "pcd_kp_<ksp options>",
                "pcd_{mp,kp,fp}_mat_type {aij,matfree}",
                "pcd_bc_variant {pin,nullspace}",
            ],
        ),
        ("mass", &["mass_<ksp options>"]),
        (
            "schwarz",
            &[
                "schwarz_composite_type additive",
                "schwarz_patch_save_operators <bool>",
                "schwarz_patch_ksp_type preonly",
                "schwarz_patch_pc_type lu",
                "schwarz_coarse_<ksp options>",
            ],
        ),
    ];
    let mut s = String::new();
    for (title, keys) in sections {
        s.push_str(title);
        s.push('\n');
        for k in keys {
            s.push_str("  -");
            s.push_str(k);
            s.push('\n');
        }
    }
    s.push_str("Nonlinear\n  -snes_type newtonls\n  -snes_rtol <real>\n  -snes_atol <real>\n  -snes_max_it <int>\n  -snes_monitor\n  -snes_linesearch_type basic\n  -mat_type {aij,matfree}\n  -pmat_type {aij,matfree}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn view(args: &[&str], nfields: Option<usize>) -> String {
        let db = OptionsDb::parse_args(args).unwrap();
        build_ksp(&db, "", nfields, &BuildCtx::default()).unwrap().view_string()
    }

    #[test]
    fn direct_tree() {
        let v = view(&["-ksp_type", "preonly", "-pc_type", "lu"], None);
        assert!(v.contains("type: preonly"));
        assert!(v.contains("type: lu"));
    }

    #[test]
    fn unknown_types_list_known_ones() {
        let db = OptionsDb::parse_args(["-pc_type", "magic"]).unwrap();
        let err = build_ksp(&db, "", None, &BuildCtx::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("magic") && msg.contains("fieldsplit"), "{msg}");
        let db = OptionsDb::parse_args(["-ksp_type", "bicg"]).unwrap();
        assert!(build_ksp(&db, "", None, &BuildCtx::default()).is_err());
    }

    #[test]
    fn schur_needs_two_splits() {
        let db = OptionsDb::parse_args(["-pc_type", "fieldsplit", "-pc_fieldsplit_type", "schur"]).unwrap();
        assert!(matches!(build_ksp(&db, "", Some(3), &BuildCtx::default()), Err(Error::MissingFields { .. })));
        assert!(build_ksp(&db, "", Some(2), &BuildCtx::default()).is_ok());
    }

    #[test]
    fn bad_value_names_the_key() {
        let db = OptionsDb::parse_args([
            "-prefix_push",
            "fieldsplit_0_",
            "-ksp_rtol",
            "tight",
            "-prefix_pop",
            "-pc_type",
            "fieldsplit",
        ])
        .unwrap();
        let err = build_ksp(&db, "", Some(2), &BuildCtx::default()).unwrap_err().to_string();
        assert!(err.contains("fieldsplit_0_ksp_rtol"), "{err}");
    }

    #[test]
    fn building_twice_gives_the_same_view() {
        let args = ["-pc_type", "fieldsplit", "-pc_fieldsplit_type", "schur", "-fieldsplit_1_pc_type", "pcd"];
        assert_eq!(view(&args, Some(2)), view(&args, Some(2)));
    }
}

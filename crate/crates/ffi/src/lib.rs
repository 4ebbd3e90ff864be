//! C ABI over the `pendellosung` crate.
//!
//! Functions return a [`PdlStatus`]; on failure a message is available from
//! [`pdl_last_error`] on the same thread. Handles are opaque and must be
//! released with the matching `_free` function.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pendellosung::fringes::{bessel_j0, fringe_count, BladeGeometry};
use pendellosung::inference::{
    charge_radius_from_bne, design_budget, extract_bne_single, joint_fit, BudgetOptions, JointOptions, Measurement,
    PhysicalConstants,
};
use pendellosung::lattice::{b_meas, classify, q_over_4pi, CrystalSpec, Reflection, ReflectionClass, ScatteringModel};
use pendellosung::planner::{
    bragg_angle, enumerate_candidates, enumerate_pure, CandidateBounds, ReflectionPlan, SpectrumWindow,
};
use pendellosung::{Error, Uncertain};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Forbidden = 3,
    NoReflection = 4,
    EmptyWindow = 5,
    FormFactorDomain = 6,
    Degenerate = 7,
    InsufficientData = 8,
    Config = 9,
    Io = 10,
    OutOfRange = 11,
    Panic = 12,
}

/// Diamond-structure reflection classes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdlClass {
    Disallowed = 0,
    Forbidden = 1,
    Weak = 2,
    Strong = 3,
}

impl From<ReflectionClass> for PdlClass {
    fn from(c: ReflectionClass) -> Self {
        match c {
            ReflectionClass::Disallowed => PdlClass::Disallowed,
            ReflectionClass::Forbidden => PdlClass::Forbidden,
            ReflectionClass::Weak => PdlClass::Weak,
            ReflectionClass::Strong => PdlClass::Strong,
        }
    }
}

/// Crystal, scattering model and spectrum window.
pub struct PdlModel {
    crystal: CrystalSpec,
    model: ScatteringModel,
    window: SpectrumWindow,
}

/// A list of planned reflections.
pub struct PdlPlan {
    plans: Vec<ReflectionPlan>,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PdlPlanEntry {
    pub h: i32,
    pub k: i32,
    pub l: i32,
    pub class: i32,
    pub f: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub two_theta_min: f64,
    pub two_theta_max: f64,
    pub f2_fm2: f64,
    /// 1 if free of harmonic contamination.
    pub pure: i32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PdlFringeCount {
    pub periods: u64,
    pub maxima: u64,
    pub zeros: u64,
    pub argument_min: f64,
    pub argument_max: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PdlBudget {
    pub two_stage_sigma_b: f64,
    pub two_stage_sigma_bne: f64,
    /// 0 when the joint design is singular; the joint fields are then 0.
    pub joint_valid: i32,
    pub joint_sigma_b: f64,
    pub joint_sigma_bne: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PdlJointFit {
    pub b_factor: f64,
    pub b_factor_sigma: f64,
    pub b_ne: f64,
    pub b_ne_sigma: f64,
    pub b_nuclear: f64,
    pub b_nuclear_sigma: f64,
    pub chi2: f64,
    pub dof: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PdlStatus {
    match e {
        Error::NoReflection { .. } => PdlStatus::NoReflection,
        Error::EmptyWindow(_) => PdlStatus::EmptyWindow,
        Error::ForbiddenReflection(_) => PdlStatus::Forbidden,
        Error::FormFactorDomain { .. } => PdlStatus::FormFactorDomain,
        Error::InvalidTable(_) | Error::Config(_) => PdlStatus::Config,
        Error::InsufficientData(_) => PdlStatus::InsufficientData,
        Error::DegenerateGeometry(_) | Error::DegenerateAbscissa | Error::SingularDesign(_) => PdlStatus::Degenerate,
        Error::InvalidInput(_) => PdlStatus::InvalidInput,
        Error::Io(_) | Error::Csv(_) => PdlStatus::Io,
    }
}

enum Failure {
    Lib(Error),
    Status(PdlStatus, String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn null() -> Failure {
    Failure::Status(PdlStatus::NullPointer, "null pointer argument".into())
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PdlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PdlStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            PdlStatus::Panic
        }
    }
}

unsafe fn model_ref<'a>(m: *const PdlModel) -> Result<&'a PdlModel, Failure> {
    m.as_ref().ok_or_else(null)
}

unsafe fn write_out<T>(out: *mut T, v: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null());
    }
    out.write(v);
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pdl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Built-in crystal ("Si" or "Ge") with the given b_ne (fm) and the default
/// spectrum window. Returns NULL on failure.
///
/// # Safety
/// `crystal` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pdl_model_new_builtin(crystal: *const c_char, b_ne: f64) -> *mut PdlModel {
    let mut out = ptr::null_mut();
    let status = guard(|| {
        if crystal.is_null() {
            return Err(null());
        }
        let name = CStr::from_ptr(crystal)
            .to_str()
            .map_err(|_| Failure::Status(PdlStatus::InvalidInput, "crystal name is not UTF-8".into()))?;
        let c = CrystalSpec::builtin(name)
            .ok_or_else(|| Failure::Status(PdlStatus::InvalidInput, format!("unknown crystal '{name}'")))?;
        if !b_ne.is_finite() {
            return Err(Failure::Status(PdlStatus::InvalidInput, "b_ne must be finite".into()));
        }
        let model = ScatteringModel::builtin(&c, b_ne)?;
        out = Box::into_raw(Box::new(PdlModel {
            crystal: c,
            model,
            window: SpectrumWindow::default(),
        }));
        Ok(())
    });
    if status == PdlStatus::Ok {
        out
    } else {
        ptr::null_mut()
    }
}

/// # Safety
/// `model` must come from `pdl_model_new_builtin` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pdl_model_free(model: *mut PdlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Replaces the spectrum window (Å and degrees).
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pdl_model_set_window(
    model: *mut PdlModel,
    lambda_min: f64,
    lambda_max: f64,
    two_theta_min: f64,
    two_theta_max: f64,
) -> PdlStatus {
    guard(|| {
        let m = model.as_mut().ok_or_else(null)?;
        let w = SpectrumWindow {
            lambda_min,
            lambda_max,
            two_theta_min,
            two_theta_max,
            ..m.window
        };
        w.validate()?;
        m.window = w;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn pdl_classify(h: i32, k: i32, l: i32) -> PdlClass {
    classify(Reflection::new(h, k, l)).into()
}

#[no_mangle]
pub extern "C" fn pdl_bessel_j0(x: f64) -> f64 {
    bessel_j0(x)
}

/// Q/4π in Å⁻¹.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pdl_q_over_4pi(model: *const PdlModel, h: i32, k: i32, l: i32, out: *mut f64) -> PdlStatus {
    guard(|| {
        let m = model_ref(model)?;
        write_out(out, q_over_4pi(&m.crystal, Reflection::new(h, k, l)))
    })
}

/// Debye-Waller-attenuated scattering length at Q/4π, fm.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pdl_b_meas(model: *const PdlModel, q_over_4pi: f64, out: *mut f64) -> PdlStatus {
    guard(|| {
        let m = model_ref(model)?;
        if !(q_over_4pi >= 0.0) {
            return Err(Failure::Status(
                PdlStatus::InvalidInput,
                "Q/4π must be non-negative".into(),
            ));
        }
        write_out(out, b_meas(&m.model, q_over_4pi)?)
    })
}

/// Bragg angle θ in degrees.
///
/// # Safety
/// `model` must be a live handle and `theta_deg` writable.
#[no_mangle]
pub unsafe extern "C" fn pdl_bragg_angle(
    model: *const PdlModel,
    h: i32,
    k: i32,
    l: i32,
    lambda: f64,
    theta_deg: *mut f64,
) -> PdlStatus {
    guard(|| {
        let m = model_ref(model)?;
        write_out(theta_deg, bragg_angle(&m.crystal, Reflection::new(h, k, l), lambda)?)
    })
}

/// Fringe counts over the reflection's window for a blade of the given thickness.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pdl_fringe_count(
    model: *const PdlModel,
    h: i32,
    k: i32,
    l: i32,
    thickness_cm: f64,
    out: *mut PdlFringeCount,
) -> PdlStatus {
    guard(|| {
        let m = model_ref(model)?;
        let g = BladeGeometry {
            thickness_cm,
            cut_plane: None,
        };
        let c = fringe_count(&m.crystal, &m.model, Reflection::new(h, k, l), &g, &m.window)?;
        write_out(
            out,
            PdlFringeCount {
                periods: c.periods,
                maxima: c.maxima,
                zeros: c.zeros as u64,
                argument_min: c.argument_range.0,
                argument_max: c.argument_range.1,
                lambda_min: c.window.lambda.0,
                lambda_max: c.window.lambda.1,
            },
        )
    })
}

/// b_ne (fm) from one Debye-Waller-corrected scattering length.
///
/// # Safety
/// `value` and `sigma` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pdl_extract_bne_single(
    b_q: f64,
    b_q_sigma: f64,
    b_nuclear: f64,
    b_nuclear_sigma: f64,
    z: u32,
    f: f64,
    value: *mut f64,
    sigma: *mut f64,
) -> PdlStatus {
    guard(|| {
        if value.is_null() || sigma.is_null() {
            return Err(null());
        }
        let u = extract_bne_single(
            Uncertain::new(b_q, b_q_sigma),
            Uncertain::new(b_nuclear, b_nuclear_sigma),
            z,
            f,
        )?;
        write_out(value, u.value)?;
        write_out(sigma, u.sigma)
    })
}

/// Mean-square charge radius (fm²) from b_ne (fm), CODATA 2018 constants.
///
/// # Safety
/// `r2` and `r2_sigma` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pdl_charge_radius(b_ne: f64, b_ne_sigma: f64, r2: *mut f64, r2_sigma: *mut f64) -> PdlStatus {
    guard(|| {
        if r2.is_null() || r2_sigma.is_null() {
            return Err(null());
        }
        let u = charge_radius_from_bne(&PhysicalConstants::default(), Uncertain::new(b_ne, b_ne_sigma));
        write_out(r2, u.value)?;
        write_out(r2_sigma, u.sigma)
    })
}

/// Plans the reflections of the model's window up to (642). Pure ones only
/// unless `include_contaminated` is non-zero. Returns NULL on failure.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pdl_plan_new(model: *const PdlModel, include_contaminated: i32) -> *mut PdlPlan {
    let mut out = ptr::null_mut();
    let status = guard(|| {
        let m = model_ref(model)?;
        let bounds = CandidateBounds::default();
        let plans = if include_contaminated != 0 {
            enumerate_candidates(&m.crystal, &m.model, &m.window, &bounds)?
        } else {
            enumerate_pure(&m.crystal, &m.model, &m.window, &bounds)?
        };
        out = Box::into_raw(Box::new(PdlPlan { plans }));
        Ok(())
    });
    if status == PdlStatus::Ok {
        out
    } else {
        ptr::null_mut()
    }
}

/// # Safety
/// `plan` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn pdl_plan_len(plan: *const PdlPlan) -> usize {
    plan.as_ref().map_or(0, |p| p.plans.len())
}

/// # Safety
/// `plan` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pdl_plan_get(plan: *const PdlPlan, index: usize, out: *mut PdlPlanEntry) -> PdlStatus {
    guard(|| {
        let p = plan.as_ref().ok_or_else(null)?;
        let e = p.plans.get(index).ok_or_else(|| {
            Failure::Status(
                PdlStatus::OutOfRange,
                format!("index {index} out of range (len {})", p.plans.len()),
            )
        })?;
        write_out(
            out,
            PdlPlanEntry {
                h: e.reflection.h,
                k: e.reflection.k,
                l: e.reflection.l,
                class: PdlClass::from(e.class) as i32,
                f: e.f,
                lambda_min: e.window.lambda.0,
                lambda_max: e.window.lambda.1,
                two_theta_min: e.window.two_theta.0,
                two_theta_max: e.window.two_theta.1,
                f2_fm2: e.f2_fm2,
                pure: e.pure as i32,
            },
        )
    })
}

/// # Safety
/// `plan` must come from `pdl_plan_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pdl_plan_free(plan: *mut PdlPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

unsafe fn reflections(hkl: *const i32, n: usize) -> Result<Vec<Reflection>, Failure> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if hkl.is_null() {
        return Err(null());
    }
    let s = std::slice::from_raw_parts(hkl, 3 * n);
    Ok(s.chunks_exact(3).map(|c| Reflection::new(c[0], c[1], c[2])).collect())
}

/// Projected σ_B (Å²) and σ_bne (fm) for `n` reflections given as 3·n
/// Miller indices, each measured with σ (fm).
///
/// # Safety
/// `hkl` must point to 3·n integers; `model` live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pdl_budget(
    model: *const PdlModel,
    hkl: *const i32,
    n: usize,
    sigma: f64,
    include_forward: i32,
    out: *mut PdlBudget,
) -> PdlStatus {
    guard(|| {
        let m = model_ref(model)?;
        let rs = reflections(hkl, n)?;
        let opts = BudgetOptions {
            sigma,
            forward: include_forward != 0,
            ..Default::default()
        };
        let b = design_budget(&m.crystal, &m.model, &rs, &opts)?;
        let j = b.joint.unwrap_or(pendellosung::inference::BudgetEntry {
            sigma_b_factor: 0.0,
            sigma_b_ne: 0.0,
        });
        write_out(
            out,
            PdlBudget {
                two_stage_sigma_b: b.two_stage.sigma_b_factor,
                two_stage_sigma_bne: b.two_stage.sigma_b_ne,
                joint_valid: b.joint.is_some() as i32,
                joint_sigma_b: j.sigma_b_factor,
                joint_sigma_bne: j.sigma_b_ne,
            },
        )
    })
}

/// Joint fit of (B, b_ne, b_nuclear) with the crystal's forward value as a prior.
///
/// # Safety
/// `hkl` must point to 3·n integers, `b_meas` and `sigma` to n doubles.
#[no_mangle]
pub unsafe extern "C" fn pdl_joint_fit(
    model: *const PdlModel,
    hkl: *const i32,
    b_meas: *const f64,
    sigma: *const f64,
    n: usize,
    out: *mut PdlJointFit,
) -> PdlStatus {
    guard(|| {
        let m = model_ref(model)?;
        let rs = reflections(hkl, n)?;
        if n > 0 && (b_meas.is_null() || sigma.is_null()) {
            return Err(null());
        }
        let ms: Vec<Measurement> = (0..n)
            .map(|i| Measurement::new(rs[i], *b_meas.add(i), *sigma.add(i)))
            .collect();
        let fit = joint_fit(
            &m.crystal,
            &m.model.form_factor,
            &ms,
            m.crystal.b_nuclear,
            &JointOptions::default(),
        )?;
        let p = |name| fit.parameter(name).unwrap_or(Uncertain::exact(0.0));
        let (bf, bne, b0) = (p("B"), p("b_ne"), p("b_nuclear"));
        write_out(
            out,
            PdlJointFit {
                b_factor: bf.value,
                b_factor_sigma: bf.sigma,
                b_ne: bne.value,
                b_ne_sigma: bne.sigma,
                b_nuclear: b0.value,
                b_nuclear_sigma: b0.sigma,
                chi2: fit.chi2,
                dof: fit.dof as u64,
            },
        )
    })
}

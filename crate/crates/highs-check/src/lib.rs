//! Thin safe wrapper over the HiGHS C API for reading and solving LP files.
//!
//! Used only by test suites to cross-check exported models.

use std::collections::BTreeMap;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::path::Path;
use std::time::Instant;

use highs_sys::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    TimeLimit,
    Other(i32),
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: Status,
    /// Objective value when a feasible point is known.
    pub objective: Option<f64>,
    pub seconds: f64,
    /// Column values by name (empty unless a feasible point is known).
    pub columns: BTreeMap<String, f64>,
}

struct Handle(*mut std::os::raw::c_void);

impl Drop for Handle {
    fn drop(&mut self) {
        unsafe { Highs_destroy(self.0) }
    }
}

/// Reads `path` with HiGHS's LP reader and solves it.
pub fn solve_lp_file(path: &Path, time_limit: Option<f64>) -> Result<Outcome, String> {
    let path_c = CString::new(path.to_string_lossy().as_bytes()).map_err(|e| e.to_string())?;
    let start = Instant::now();
    unsafe {
        let h = Handle(Highs_create());
        let flag = CString::new("output_flag").unwrap();
        Highs_setBoolOptionValue(h.0, flag.as_ptr(), 0);
        let threads = CString::new("threads").unwrap();
        Highs_setIntOptionValue(h.0, threads.as_ptr(), 1);
        if let Some(limit) = time_limit {
            let opt = CString::new("time_limit").unwrap();
            Highs_setDoubleOptionValue(h.0, opt.as_ptr(), limit);
        }
        if Highs_readModel(h.0, path_c.as_ptr()) == kHighsStatusError {
            return Err(format!("HiGHS could not read {}", path.display()));
        }
        if Highs_run(h.0) == kHighsStatusError {
            return Err("HiGHS run failed".into());
        }
        let status = match Highs_getModelStatus(h.0) {
            s if s == kHighsModelStatusOptimal => Status::Optimal,
            s if s == kHighsModelStatusInfeasible => Status::Infeasible,
            s if s == kHighsModelStatusTimeLimit => Status::TimeLimit,
            s => Status::Other(s as i32),
        };
        let mut primal_status: HighsInt = 0;
        let key = CString::new("primal_solution_status").unwrap();
        Highs_getIntInfoValue(h.0, key.as_ptr(), &mut primal_status);
        let feasible_point = primal_status == kHighsSolutionStatusFeasible;
        let mut columns = BTreeMap::new();
        let objective = if feasible_point {
            let ncol = Highs_getNumCol(h.0) as usize;
            let nrow = Highs_getNumRow(h.0) as usize;
            let mut col_value = vec![0.0; ncol];
            let mut col_dual = vec![0.0; ncol];
            let mut row_value = vec![0.0; nrow];
            let mut row_dual = vec![0.0; nrow];
            Highs_getSolution(
                h.0,
                col_value.as_mut_ptr(),
                col_dual.as_mut_ptr(),
                row_value.as_mut_ptr(),
                row_dual.as_mut_ptr(),
            );
            let mut buf = vec![0 as c_char; 1024];
            for (k, v) in col_value.iter().enumerate() {
                Highs_getColName(h.0, k as HighsInt, buf.as_mut_ptr());
                let name = CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned();
                columns.insert(name, *v);
            }
            Some(Highs_getObjectiveValue(h.0))
        } else {
            None
        };
        Ok(Outcome {
            status,
            objective,
            seconds: start.elapsed().as_secs_f64(),
            columns,
        })
    }
}

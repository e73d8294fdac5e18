//! Binary observation-set files, so data generation and solving can run as
//! separate CLI stages.
//!
//! All integers are `u64` and all reals `f64`, little-endian. Layout:
//!
//! ```text
//! magic        8 bytes  "LRKOBS01"
//! model        u8       0 identity | 1 multivar | 2 var | 3 compressed
//! has_truth    u8
//! has_noise    u8
//! reserved     5 bytes  zero
//! k p N n      4 × u64  n = vector samples (design rows), N for other models
//! seed         u64
//! noise_level  f64
//! y            N reals
//! noise        N reals                      if has_noise
//! operator     design: n×p row-major | compressed: N×(kp), row i = vec(Xᵢ)
//! params       multivar: Σₓ (p×p) | var: γ, ν, Σ (p×p)
//! theta_star   k×p row-major                if has_truth (required for var)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DVector;

use super::{
    DesignOperator, GaussianOperator, IdentityOperator, LinearMatrixOperator, ModelKind,
    ModelParams, ObservationSet, Operator, VarParams,
};
use crate::error::{Error, Result};
use crate::matcore::DenseMatrix;

const MAGIC: &[u8; 8] = b"LRKOBS01";

fn put_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64(w: &mut impl Write, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_slice(w: &mut impl Write, vals: impl IntoIterator<Item = f64>) -> Result<()> {
    for v in vals {
        put_f64(w, v)?;
    }
    Ok(())
}

fn put_row_major(w: &mut impl Write, m: &DenseMatrix) -> Result<()> {
    for i in 0..m.nrows() {
        put_slice(w, m.row(i).iter().copied())?;
    }
    Ok(())
}

fn get_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn get_vec(r: &mut impl Read, len: usize) -> Result<Vec<f64>> {
    (0..len).map(|_| get_f64(r)).collect()
}

fn get_row_major(r: &mut impl Read, rows: usize, cols: usize) -> Result<DenseMatrix> {
    let data = get_vec(r, rows * cols)?;
    Ok(DenseMatrix::from_row_slice(rows, cols, &data))
}

fn to_usize(v: u64) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::Format(format!("size {v} does not fit in memory")))
}

pub fn write_observation_set(set: &ObservationSet, path: impl AsRef<Path>) -> Result<()> {
    set.validate()?;
    let shape = set.shape();
    let kind = set.kind();
    if kind == ModelKind::Var && set.theta_star.is_none() {
        return Err(Error::Format(
            "VAR sets must carry their system matrix".into(),
        ));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&[
        kind.code(),
        set.theta_star.is_some() as u8,
        set.noise.is_some() as u8,
        0,
        0,
        0,
        0,
        0,
    ])?;
    put_u64(&mut w, shape.k as u64)?;
    put_u64(&mut w, shape.p as u64)?;
    put_u64(&mut w, shape.n_obs as u64)?;
    put_u64(&mut w, set.samples() as u64)?;
    put_u64(&mut w, set.seed)?;
    put_f64(&mut w, set.noise_level)?;
    put_slice(&mut w, set.y.iter().copied())?;
    if let Some(noise) = &set.noise {
        put_slice(&mut w, noise.iter().copied())?;
    }
    match &set.operator {
        Operator::Identity(_) => {}
        Operator::Design(op) => put_row_major(&mut w, op.design())?,
        Operator::Gaussian(op) => put_row_major(&mut w, op.stacked())?,
    }
    match &set.params {
        ModelParams::Multivar { sigma_x } => put_row_major(&mut w, sigma_x)?,
        ModelParams::Var(vp) => {
            put_f64(&mut w, vp.gamma)?;
            put_f64(&mut w, vp.nu)?;
            put_row_major(&mut w, &vp.sigma)?;
        }
        ModelParams::Identity | ModelParams::Compressed => {}
    }
    if let Some(theta) = &set.theta_star {
        put_row_major(&mut w, theta)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_observation_set(path: impl AsRef<Path>) -> Result<ObservationSet> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not an observation-set file".into()));
    }
    let mut flags = [0u8; 8];
    r.read_exact(&mut flags)?;
    let kind = ModelKind::from_code(flags[0])
        .ok_or_else(|| Error::Format(format!("unknown model code {}", flags[0])))?;
    let has_truth = flags[1] != 0;
    let has_noise = flags[2] != 0;
    let k = to_usize(get_u64(&mut r)?)?;
    let p = to_usize(get_u64(&mut r)?)?;
    let n_obs = to_usize(get_u64(&mut r)?)?;
    let samples = to_usize(get_u64(&mut r)?)?;
    let seed = get_u64(&mut r)?;
    let noise_level = get_f64(&mut r)?;
    let y = DVector::from_vec(get_vec(&mut r, n_obs)?);
    let noise = if has_noise {
        Some(DVector::from_vec(get_vec(&mut r, n_obs)?))
    } else {
        None
    };
    let operator = match kind {
        ModelKind::Identity => Operator::Identity(IdentityOperator::new(k, p)),
        ModelKind::Multivar | ModelKind::Var => {
            let design = get_row_major(&mut r, samples, p)?;
            Operator::Design(DesignOperator::new(design, k, kind)?)
        }
        ModelKind::Compressed => {
            let stacked = get_row_major(&mut r, n_obs, k * p)?;
            Operator::Gaussian(GaussianOperator::from_stacked(k, p, stacked)?)
        }
    };
    if operator.shape().n_obs != n_obs {
        return Err(Error::Format("header N disagrees with operator".into()));
    }
    let params_raw = match kind {
        ModelKind::Multivar => Some(get_row_major(&mut r, p, p)?).map(|s| (None, s)),
        ModelKind::Var => {
            let gamma = get_f64(&mut r)?;
            let nu = get_f64(&mut r)?;
            Some((Some((gamma, nu)), get_row_major(&mut r, p, p)?))
        }
        _ => None,
    };
    let theta_star = if has_truth {
        Some(get_row_major(&mut r, k, p)?)
    } else {
        None
    };
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    let params = match (kind, params_raw) {
        (ModelKind::Multivar, Some((_, sigma_x))) => ModelParams::Multivar { sigma_x },
        (ModelKind::Var, Some((Some((gamma, nu)), sigma))) => {
            let theta = theta_star
                .clone()
                .ok_or_else(|| Error::Format("VAR set without system matrix".into()))?;
            ModelParams::Var(VarParams {
                theta_star: theta,
                nu,
                n: samples,
                gamma,
                sigma,
            })
        }
        (ModelKind::Compressed, _) => ModelParams::Compressed,
        _ => ModelParams::Identity,
    };
    let set = ObservationSet {
        y,
        operator,
        noise_level,
        seed,
        params,
        noise,
        theta_star,
    };
    set.validate()?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{
        generate_exact_lowrank, sample_compressed, sample_identity, sample_multivar, sample_var,
    };

    #[test]
    fn every_model_survives_a_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let truth = generate_exact_lowrank(3, 4, 2, 1.0, 1).unwrap();
        let square = generate_exact_lowrank(4, 4, 2, 0.5, 2).unwrap();
        let sets = [
            sample_identity(&truth, 0.1, 1).unwrap(),
            sample_multivar(&truth, 9, &DenseMatrix::identity(4, 4), 1.0, 2).unwrap(),
            sample_var(&VarParams::new(square.theta_star, 1.0, 12, 0.5).unwrap(), 3).unwrap(),
            sample_compressed(&truth, 17, 0.5, 4).unwrap(),
        ];
        for (i, set) in sets.iter().enumerate() {
            let path = dir.path().join(format!("set{i}.bin"));
            write_observation_set(set, &path).unwrap();
            let back = read_observation_set(&path).unwrap();
            assert_eq!(&back, set, "model {:?}", set.kind());
        }
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.bin");
        std::fs::write(&path, b"definitely not a set").unwrap();
        assert!(matches!(read_observation_set(&path), Err(Error::Format(_))));
    }
}

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::CMatrix;
use crate::error::{Error, Result};
use crate::fock_space::MAX_ORBITALS;

/// One- and two-body integrals over spin-orbitals.
///
/// Two-body integrals are stored antisymmetrized in physicist notation,
/// `g[p][q][r][s] = ⟨pq||rs⟩ = ⟨pq|rs⟩ - ⟨pq|sr⟩`, so that
/// `H = E_core + Σ h_pq a†_p a_q + ¼ Σ ⟨pq||rs⟩ a†_p a†_q a_s a_r`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegralSet {
    n_orbitals: usize,
    one_body: Vec<Complex64>,
    two_body: Vec<Complex64>,
    core_energy: f64,
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

impl IntegralSet {
    pub fn zeros(n_orbitals: usize) -> Result<Self> {
        if n_orbitals > MAX_ORBITALS {
            return Err(Error::InvalidDimension(format!(
                "{n_orbitals} spin-orbitals exceeds the limit of {MAX_ORBITALS}"
            )));
        }
        Ok(Self {
            n_orbitals,
            one_body: vec![ZERO; n_orbitals.pow(2)],
            two_body: vec![ZERO; n_orbitals.pow(4)],
            core_energy: 0.0,
        })
    }

    /// Builds from a one-body function and a non-antisymmetrized physicist
    /// two-body function `⟨pq|rs⟩`.
    pub fn from_physicist(
        n_orbitals: usize,
        one_body: impl Fn(usize, usize) -> Complex64,
        two_body: impl Fn(usize, usize, usize, usize) -> Complex64,
        core_energy: f64,
    ) -> Result<Self> {
        let mut ints = Self::zeros(n_orbitals)?;
        ints.core_energy = core_energy;
        let m = n_orbitals;
        for p in 0..m {
            for q in 0..m {
                ints.one_body[p * m + q] = one_body(p, q);
            }
        }
        for p in 0..m {
            for q in 0..m {
                for r in 0..m {
                    for s in 0..m {
                        let v = two_body(p, q, r, s) - two_body(p, q, s, r);
                        let idx = ints.idx4(p, q, r, s);
                        ints.two_body[idx] = v;
                    }
                }
            }
        }
        Ok(ints)
    }

    /// Expands spatial-orbital integrals to spin-orbitals `2k` (up) and
    /// `2k+1` (down). `eri(i, j, k, l)` is the chemist-notation `(ij|kl)`.
    pub fn from_spatial_chemist(
        n_spatial: usize,
        one_body: impl Fn(usize, usize) -> Complex64,
        eri: impl Fn(usize, usize, usize, usize) -> Complex64,
        core_energy: f64,
    ) -> Result<Self> {
        let spin = |p: usize| p % 2;
        let sp = |p: usize| p / 2;
        Self::from_physicist(
            2 * n_spatial,
            |p, q| {
                if spin(p) == spin(q) {
                    one_body(sp(p), sp(q))
                } else {
                    ZERO
                }
            },
            |p, q, r, s| {
                if spin(p) == spin(r) && spin(q) == spin(s) {
                    eri(sp(p), sp(r), sp(q), sp(s))
                } else {
                    ZERO
                }
            },
            core_energy,
        )
    }

    /// Open-chain Hubbard model in the site basis (spin-orbital `2i+σ`),
    /// with optional on-site energies.
    pub fn hubbard(sites: usize, hopping: f64, repulsion: f64, onsite: &[f64]) -> Result<Self> {
        if !onsite.is_empty() && onsite.len() != sites {
            return Err(Error::InvalidInput(format!(
                "{} on-site energies given for {sites} sites",
                onsite.len()
            )));
        }
        Self::from_spatial_chemist(
            sites,
            |i, j| {
                if i.abs_diff(j) == 1 {
                    Complex64::new(-hopping, 0.0)
                } else if i == j {
                    Complex64::new(onsite.get(i).copied().unwrap_or(0.0), 0.0)
                } else {
                    ZERO
                }
            },
            |i, j, k, l| {
                if i == j && j == k && k == l {
                    Complex64::new(repulsion, 0.0)
                } else {
                    ZERO
                }
            },
            0.0,
        )
    }

    /// The Hubbard chain rotated into its tight-binding eigenbasis, orbitals
    /// ordered by energy, so the aufbau determinant is the mean-field reference.
    pub fn hubbard_mo(sites: usize, hopping: f64, repulsion: f64, onsite: &[f64]) -> Result<Self> {
        let site_ints = Self::hubbard(sites, hopping, repulsion, onsite)?;
        let tb = DMatrix::from_fn(sites, sites, |i, j| site_ints.h(2 * i, 2 * j).re);
        let eig = SymmetricEigen::new(tb);
        let mut order: Vec<usize> = (0..sites).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let m = 2 * sites;
        let mut c = CMatrix::zeros(m, m);
        for (k, &col) in order.iter().enumerate() {
            // fix the sign so the first non-negligible component is positive
            let v = eig.eigenvectors.column(col);
            let sign = v
                .iter()
                .find(|x| x.abs() > 1e-12)
                .map_or(1.0, |x| x.signum());
            for i in 0..sites {
                for s in 0..2 {
                    c[(2 * i + s, 2 * k + s)] = Complex64::new(sign * v[i], 0.0);
                }
            }
        }
        site_ints.transform(&c)
    }

    /// Reduced BCS pairing model with unit level spacing:
    /// `H = Σ_p p (n_p↑ + n_p↓) - g Σ_pq P†_p P_q`.
    pub fn pairing(levels: usize, coupling: f64) -> Result<Self> {
        Self::from_spatial_chemist(
            levels,
            |i, j| {
                if i == j {
                    Complex64::new(i as f64, 0.0)
                } else {
                    ZERO
                }
            },
            |i, j, k, l| {
                if i == k && j == l {
                    Complex64::new(-coupling, 0.0)
                } else {
                    ZERO
                }
            },
            0.0,
        )
    }

    #[inline]
    fn idx4(&self, p: usize, q: usize, r: usize, s: usize) -> usize {
        let m = self.n_orbitals;
        ((p * m + q) * m + r) * m + s
    }

    pub fn n_orbitals(&self) -> usize {
        self.n_orbitals
    }

    pub fn core_energy(&self) -> f64 {
        self.core_energy
    }

    pub fn set_core_energy(&mut self, e: f64) {
        self.core_energy = e;
    }

    #[inline]
    pub fn h(&self, p: usize, q: usize) -> Complex64 {
        self.one_body[p * self.n_orbitals + q]
    }

    /// `⟨pq||rs⟩`.
    #[inline]
    pub fn g(&self, p: usize, q: usize, r: usize, s: usize) -> Complex64 {
        self.two_body[self.idx4(p, q, r, s)]
    }

    /// Sets `h_pq` and its Hermitian partner `h_qp`.
    pub fn set_one_body(&mut self, p: usize, q: usize, value: Complex64) {
        let m = self.n_orbitals;
        self.one_body[p * m + q] = value;
        self.one_body[q * m + p] = value.conj();
    }

    /// Largest violation of `h_pq = h_qp*`, `⟨pq||rs⟩ = ⟨rs||pq⟩*` and
    /// `⟨pq||rs⟩ = -⟨qp||rs⟩ = -⟨pq||sr⟩`.
    pub fn symmetry_defect(&self) -> f64 {
        let m = self.n_orbitals;
        let mut worst: f64 = 0.0;
        for p in 0..m {
            for q in 0..m {
                worst = worst.max((self.h(p, q) - self.h(q, p).conj()).norm());
                for r in 0..m {
                    for s in 0..m {
                        let g = self.g(p, q, r, s);
                        worst = worst
                            .max((g - self.g(r, s, p, q).conj()).norm())
                            .max((g + self.g(q, p, r, s)).norm())
                            .max((g + self.g(p, q, s, r)).norm());
                    }
                }
            }
        }
        worst
    }

    /// Rotates to new orbitals `φ'_p = Σ_a c[a][p] φ_a` for unitary `c`.
    pub fn transform(&self, c: &CMatrix) -> Result<Self> {
        let m = self.n_orbitals;
        if c.nrows() != m || c.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: c.nrows(),
            });
        }
        let defect = super::matfn::unitarity_defect(c);
        if defect > 1e-10 {
            return Err(Error::NotUnitary(defect));
        }
        let mut out = Self::zeros(m)?;
        out.core_energy = self.core_energy;
        let h = CMatrix::from_fn(m, m, |p, q| self.h(p, q));
        let h2 = c.adjoint() * h * c;
        for p in 0..m {
            for q in 0..m {
                out.one_body[p * m + q] = h2[(p, q)];
            }
        }
        let idx = |a: usize, b: usize, cc: usize, d: usize| ((a * m + b) * m + cc) * m + d;
        let mut cur = self.two_body.clone();
        let mut next = vec![ZERO; cur.len()];
        // one index at a time: bra indices take conj(c), ket indices take c
        for slot in 0..4 {
            next.iter_mut().for_each(|z| *z = ZERO);
            for a in 0..m {
                for b in 0..m {
                    for x in 0..m {
                        for d in 0..m {
                            let src = idx(a, b, x, d);
                            let v = cur[src];
                            if v == ZERO {
                                continue;
                            }
                            let old = [a, b, x, d][slot];
                            for new in 0..m {
                                let coef = if slot < 2 {
                                    c[(old, new)].conj()
                                } else {
                                    c[(old, new)]
                                };
                                if coef == ZERO {
                                    continue;
                                }
                                let mut target = [a, b, x, d];
                                target[slot] = new;
                                next[idx(target[0], target[1], target[2], target[3])] += coef * v;
                            }
                        }
                    }
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        out.two_body = cur;
        Ok(out)
    }
}

/// Header values read from an FCIDUMP file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FcidumpHeader {
    pub norb: usize,
    pub nelec: usize,
}

fn header_value(header: &str, key: &str) -> Option<usize> {
    let upper = header.to_ascii_uppercase();
    let pos = upper.find(key)?;
    let rest = upper[pos + key.len()..].trim_start();
    let rest = rest.strip_prefix('=')?.trim_start();
    let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
    digits.parse().ok()
}

/// Parses FCIDUMP text (spatial orbitals, chemist notation, 1-based indices,
/// real 8-fold symmetric integrals) into spin-orbital integrals.
pub fn parse_fcidump(text: &str) -> Result<(IntegralSet, FcidumpHeader)> {
    let mut lines = text.lines().enumerate();
    let mut header = String::new();
    let mut header_closed = false;
    for (_, line) in lines.by_ref() {
        header.push_str(line);
        header.push(' ');
        let t = line.trim().to_ascii_uppercase();
        if t.starts_with("&END") || t == "/" || t.ends_with("&END") || t.ends_with('/') {
            header_closed = true;
            break;
        }
    }
    if !header_closed {
        return Err(Error::Parse {
            line: 1,
            message: "unterminated FCIDUMP header (expected &END or /)".into(),
        });
    }
    let norb = header_value(&header, "NORB").ok_or(Error::Parse {
        line: 1,
        message: "header lacks NORB".into(),
    })?;
    let nelec = header_value(&header, "NELEC").ok_or(Error::Parse {
        line: 1,
        message: "header lacks NELEC".into(),
    })?;
    if 2 * norb > MAX_ORBITALS {
        return Err(Error::InvalidDimension(format!(
            "NORB={norb} gives {} spin-orbitals, above the limit of {MAX_ORBITALS}",
            2 * norb
        )));
    }
    if nelec > 2 * norb {
        return Err(Error::InvalidDimension(format!(
            "NELEC={nelec} exceeds 2*NORB={}",
            2 * norb
        )));
    }
    let n = norb;
    let mut h = vec![0.0; n * n];
    let mut eri = vec![0.0; n.pow(4)];
    let e4 = |i: usize, j: usize, k: usize, l: usize| ((i * n + j) * n + k) * n + l;
    let mut core = 0.0;
    for (lineno, line) in lines {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        let parse_err = |message: String| Error::Parse {
            line: lineno + 1,
            message,
        };
        if fields.len() != 5 {
            return Err(parse_err(format!("expected 5 fields, found {}", fields.len())));
        }
        let value: f64 = fields[0]
            .replace(['D', 'd'], "e")
            .parse()
            .map_err(|_| parse_err(format!("bad value {:?}", fields[0])))?;
        let mut idx = [0usize; 4];
        for (slot, f) in fields[1..].iter().enumerate() {
            idx[slot] = f
                .parse()
                .map_err(|_| parse_err(format!("bad index {f:?}")))?;
            if idx[slot] > n {
                return Err(parse_err(format!("index {} exceeds NORB={n}", idx[slot])));
            }
        }
        match idx {
            [0, 0, 0, 0] => core = value,
            [i, 0, 0, 0] if i > 0 => {} // orbital energy, not needed
            [i, j, 0, 0] if i > 0 && j > 0 => {
                h[(i - 1) * n + (j - 1)] = value;
                h[(j - 1) * n + (i - 1)] = value;
            }
            [i, j, k, l] if i > 0 && j > 0 && k > 0 && l > 0 => {
                let (i, j, k, l) = (i - 1, j - 1, k - 1, l - 1);
                for (a, b, c, d) in [
                    (i, j, k, l),
                    (j, i, k, l),
                    (i, j, l, k),
                    (j, i, l, k),
                    (k, l, i, j),
                    (l, k, i, j),
                    (k, l, j, i),
                    (l, k, j, i),
                ] {
                    eri[e4(a, b, c, d)] = value;
                }
            }
            _ => return Err(parse_err(format!("unrecognised index pattern {idx:?}"))),
        }
    }
    let ints = IntegralSet::from_spatial_chemist(
        n,
        |i, j| Complex64::new(h[i * n + j], 0.0),
        |i, j, k, l| Complex64::new(eri[e4(i, j, k, l)], 0.0),
        core,
    )?;
    Ok((ints, FcidumpHeader { norb, nelec }))
}

pub fn read_fcidump(path: impl AsRef<Path>) -> Result<(IntegralSet, FcidumpHeader)> {
    let text = std::fs::read_to_string(path)?;
    parse_fcidump(&text)
}

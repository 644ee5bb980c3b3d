//! Affine normal forms for bijective S-boxes.
//!
//! [`normalize`] maps a bijection to an affine-equivalent one with
//!
//! * `S(0) = 0` and `S(2^i) = 2^i` for every `i`,
//! * `S(3) ∈ {3, 5}`, and `S(3) = 5` when the differential uniformity is at most 4,
//! * `S(5) ≤ 11`, narrowed to `{3, 6, 9, 10, 11}` for uniformity 4 and `{6, 10}` for APN boxes,
//! * `S(2^i + 1) ≤ 2^(i+2) − 2i − 1` for `3 ≤ i ≤ n − 1`.
//!
//! Every step is a GF(2) affine map on one side of the box; the steps are
//! logged and composed into a [`TransformCertificate`]. The form is not
//! unique: different members of one equivalence class can normalize to
//! different tables (see [`sample_normal_forms`]).

use std::collections::BTreeSet;

use rand::Rng;
use serde::Serialize;

use crate::affine::{AffineMap, Side, TransformCertificate};
use crate::analysis;
use crate::error::{Error, Result};
use crate::gf2::{complete_images, random_invertible, BitMatrix};
use crate::rng;
use crate::sbox::SBox;

/// Identity except column `2^(i-1)`, which becomes `2^(i-1)` plus `bits`
/// read most significant first. Applied to a value with bit `i-1` set it
/// xors the low `i-1` bits with `bits`; all other values are fixed.
pub fn cxor_matrix(n: usize, i: usize, bits: &[u8]) -> Result<BitMatrix> {
    if i < 2 || i > n || bits.len() != i - 1 {
        return Err(Error::Dimension(format!(
            "cxor needs 2 <= i <= n and i-1 bits (n={n}, i={i}, {} bits)",
            bits.len()
        )));
    }
    let low = bits.iter().fold(0u32, |acc, &b| (acc << 1) | (b & 1) as u32);
    Ok(cxor_value(n, i, low))
}

fn cxor_value(n: usize, i: usize, low: u32) -> BitMatrix {
    let mut images: Vec<u32> = (0..n).map(|k| 1 << k).collect();
    images[i - 1] |= low;
    BitMatrix::from_images(n, &images)
}

fn bits_of(low: u32, width: usize) -> Vec<u8> {
    (0..width).rev().map(|k| ((low >> k) & 1) as u8).collect()
}

/// Two-row modification of the identity at the leading bit `p` of `v` and
/// bit `p-1` below it, with `X = 0`. Sends `v` to a value whose leading bit
/// is `p-1`; values with leading bit below `p-1` are fixed.
pub fn msb_shift_matrix(n: usize, v: u32) -> Result<BitMatrix> {
    if v < 2 || (n < 32 && v >> n != 0) {
        return Err(Error::InvalidParam(format!("msb shift needs 2 <= v < 2^{n}, got {v}")));
    }
    let p = 31 - v.leading_zeros() as usize;
    let a = (v >> (p - 1)) & 1;
    let mut images: Vec<u32> = (0..n).map(|k| 1 << k).collect();
    // new bit p = A·x_p ⊕ x_(p-1); new bit p-1 = x_p
    images[p] = (a << p) | (1 << (p - 1));
    images[p - 1] = 1 << p;
    Ok(BitMatrix::from_images(n, &images))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "stage")]
pub enum Procedure {
    FixZero,
    FixUnits,
    SetThree,
    BoundPowerPlusOne { h: usize },
    EnsurePreimageHigh { h: usize },
    FixPowerPoint { h: usize },
    RefineFive,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "op")]
pub enum Op {
    Translate { offset: u32 },
    Linear,
    MsbShift { value: u32 },
    Cxor { i: usize, bits: Vec<u8> },
    BitSwap,
}

/// One applied transform. `rows` lists the matrix rows as hex bitmasks,
/// top row first.
#[derive(Clone, Debug, Serialize)]
pub struct Stage {
    #[serde(flatten)]
    pub procedure: Procedure,
    #[serde(flatten)]
    pub op: Op,
    pub side: Side,
    pub rows: Vec<String>,
    pub offset: u32,
    #[serde(skip)]
    pub map: AffineMap,
}

/// Output of a single pipeline stage.
#[derive(Clone, Debug)]
pub struct Step {
    pub result: SBox,
    pub certificate: TransformCertificate,
    pub stages: Vec<Stage>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Checklist {
    pub fixes_zero: bool,
    pub fixes_units: bool,
    pub three: bool,
    pub five: bool,
    pub power_plus_one: bool,
    pub no_low_weight_fixed_points: bool,
}

impl Checklist {
    pub fn all(&self) -> bool {
        self.fixes_zero
            && self.fixes_units
            && self.three
            && self.five
            && self.power_plus_one
            && self.no_low_weight_fixed_points
    }
}

#[derive(Clone, Debug)]
pub struct NormalizationReport {
    pub result: SBox,
    pub certificate: TransformCertificate,
    pub stage_log: Vec<Stage>,
    pub checklist: Checklist,
}

impl NormalizationReport {
    pub fn to_json(&self) -> serde_json::Value {
        let map_json = |m: &AffineMap| {
            serde_json::json!({
                "rows": hex_rows(m.matrix()),
                "offset": m.offset(),
            })
        };
        serde_json::json!({
            "source": self.certificate.source.table(),
            "result": self.result.table(),
            "checklist": self.checklist,
            "all_satisfied": self.checklist.all(),
            "stages": self.stage_log,
            "certificate": {
                "out_map": map_json(&self.certificate.out_map),
                "in_map": map_json(&self.certificate.in_map),
            },
        })
    }
}

fn hex_rows(m: &BitMatrix) -> Vec<String> {
    m.rows_msb_first().iter().map(|r| format!("{r:#x}")).collect()
}

/// Largest allowed image of `2^i + 1`.
pub fn power_plus_one_bound(i: usize) -> u64 {
    match i {
        0 => 3,
        2 => 11,
        _ => (1u64 << (i + 2)) - 2 * i as u64 - 1,
    }
}

/// Evaluates the normal-form constraints on `s`.
pub fn checklist(s: &SBox) -> Checklist {
    let n = s.n() as usize;
    let du = analysis::differential_profile(s).du;
    let at = |x: usize| if x < s.len() { Some(s.get(x)) } else { None };
    let three = match at(3) {
        None => true,
        Some(v) if du <= 4 => v == 5,
        Some(v) => v == 3 || v == 5,
    };
    let five = match at(5) {
        None => true,
        Some(v) if du <= 2 => v == 6 || v == 10,
        Some(v) if du <= 4 => [3, 6, 9, 10, 11].contains(&v),
        Some(v) => v <= 11,
    };
    let low_weight = du > 2
        || (0..s.len()).all(|x| !(2..=3).contains(&x.count_ones()) || s.get(x) != x);
    Checklist {
        fixes_zero: s.get(0) == 0,
        fixes_units: (0..n).all(|i| s.get(1 << i) == 1 << i),
        three,
        five,
        power_plus_one: (3..n).all(|i| s.get((1 << i) + 1) as u64 <= power_plus_one_bound(i)),
        no_low_weight_fixed_points: low_weight,
    }
}

/// How [`fix_zero`] moves `S(0)` to zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ZeroFix {
    /// `S(x) ⊕ S(0)`.
    #[default]
    OutputXor,
    /// `S(x ⊕ S⁻¹(0))`.
    InputShift,
}

struct Work {
    source: SBox,
    cur: SBox,
    out_map: AffineMap,
    in_map: AffineMap,
    log: Vec<Stage>,
}

fn fail(stage: &'static str, reason: impl Into<String>) -> Error {
    Error::Normalization { stage, reason: reason.into() }
}

impl Work {
    fn new(s: &SBox) -> Result<Self> {
        if s.n() != s.m() || !s.is_bijective() {
            return Err(Error::NotBijective);
        }
        let n = s.n() as usize;
        Ok(Work {
            source: s.clone(),
            cur: s.clone(),
            out_map: AffineMap::identity(n, Side::Output),
            in_map: AffineMap::identity(n, Side::Input),
            log: Vec::new(),
        })
    }

    fn n(&self) -> usize {
        self.cur.n() as usize
    }

    fn s(&self, x: usize) -> usize {
        self.cur.get(x)
    }

    fn inv(&self, y: usize) -> usize {
        self.cur.preimage(y).expect("bijective")
    }

    fn apply(&mut self, procedure: Procedure, op: Op, map: AffineMap) {
        let n = self.cur.n();
        let table: Vec<u8> = match map.side() {
            Side::Output => self.cur.table().iter().map(|&y| map.apply(y as u32) as u8).collect(),
            Side::Input => (0..self.cur.len()).map(|x| self.cur.table()[map.apply(x as u32) as usize]).collect(),
        };
        self.cur = SBox::new(n, n, table).expect("affine image keeps widths");
        match map.side() {
            Side::Output => self.out_map = map.after(&self.out_map),
            Side::Input => self.in_map = self.in_map.after(&map),
        }
        self.log.push(Stage {
            procedure,
            op,
            side: map.side(),
            rows: hex_rows(map.matrix()),
            offset: map.offset(),
            map,
        });
    }

    fn linear(&mut self, procedure: Procedure, op: Op, m: BitMatrix, side: Side) {
        let map = AffineMap::linear(m, side).expect("stage matrices are invertible");
        self.apply(procedure, op, map);
    }

    fn cxor(&mut self, procedure: Procedure, i: usize, low: u32, side: Side) {
        let m = cxor_value(self.n(), i, low);
        self.linear(procedure, Op::Cxor { i, bits: bits_of(low, i - 1) }, m, side);
    }

    fn translate(&mut self, procedure: Procedure, offset: u32, side: Side) {
        let map = AffineMap::translation(self.n(), offset, side).expect("offset fits");
        self.apply(procedure, Op::Translate { offset }, map);
    }

    fn msb_shift(&mut self, procedure: Procedure, v: u32) {
        let m = msb_shift_matrix(self.n(), v).expect("v >= 2");
        self.linear(procedure, Op::MsbShift { value: v }, m, Side::Output);
    }

    fn finish(self) -> Step {
        let certificate = TransformCertificate {
            out_map: self.out_map,
            in_map: self.in_map,
            source: self.source,
            result: self.cur.clone(),
        };
        Step { result: self.cur, certificate, stages: self.log }
    }

    fn require_fixed(&self, stage: &'static str, xs: impl IntoIterator<Item = usize>) -> Result<()> {
        for x in xs {
            if x < self.cur.len() && self.s(x) != x {
                return Err(fail(stage, format!("expected S({x}) = {x}, found {}", self.s(x))));
            }
        }
        Ok(())
    }

    fn units_up_to(h: usize) -> impl Iterator<Item = usize> {
        std::iter::once(0).chain((0..=h).map(|i| 1 << i))
    }

    fn fix_zero(&mut self, how: ZeroFix) {
        match how {
            ZeroFix::OutputXor => {
                let c = self.s(0) as u32;
                if c != 0 {
                    self.translate(Procedure::FixZero, c, Side::Output);
                }
            }
            ZeroFix::InputShift => {
                let c = self.inv(0) as u32;
                if c != 0 {
                    self.translate(Procedure::FixZero, c, Side::Input);
                }
            }
        }
    }

    fn fix_units(&mut self, side: Side) -> Result<()> {
        self.require_fixed("fix_units", [0])?;
        let n = self.n();
        if n < 2 {
            return Ok(());
        }
        if self.s(1) == 1 && self.s(2) == 2 {
            return Ok(());
        }
        let m = match side {
            // M·S(1) = 1, M·S(2) = 2
            Side::Output => {
                complete_images(n, &[(0, self.s(1) as u32), (1, self.s(2) as u32)])?.inverse()?
            }
            // S(M·1) = 1, S(M·2) = 2
            Side::Input => complete_images(n, &[(0, self.inv(1) as u32), (1, self.inv(2) as u32)])?,
        };
        self.linear(Procedure::FixUnits, Op::Linear, m, side);
        Ok(())
    }

    fn set_s3(&mut self) -> Result<()> {
        const P: Procedure = Procedure::SetThree;
        self.require_fixed("set_s3", [0, 1, 2])?;
        let n = self.n();
        if n < 3 {
            return Ok(());
        }
        if self.s(3) == 3 {
            if analysis::differential_profile(&self.cur).du > 4 {
                return Ok(());
            }
            // Send 2 to 4 on the output side, then pull 2 back on the input
            // side through S⁻¹(2); the new S(3) cannot be 3.
            let ma = complete_images(n, &[(0, 1), (1, 4)])?;
            self.linear(P, Op::Linear, ma, Side::Output);
            let pre2 = self.inv(2) as u32;
            let mb = complete_images(n, &[(0, 1), (1, pre2)])?;
            self.linear(P, Op::Linear, mb, Side::Input);
            if self.s(3) == 3 {
                return Err(fail("set_s3", "fixed point at 3 survived the detour"));
            }
        }
        while self.s(3) > 7 {
            let v = self.s(3) as u32;
            self.msb_shift(P, v);
        }
        let v = self.s(3) as u32;
        if v >= 4 && v != 5 {
            self.cxor(P, 3, (v ^ 5) & 3, Side::Output);
        }
        Ok(())
    }

    fn check_ladder(&self, stage: &'static str, h: usize) -> Result<()> {
        let n = self.n();
        if h + 1 >= n {
            return Err(fail(stage, format!("needs h + 2 <= n (h={h}, n={n})")));
        }
        self.require_fixed(stage, Self::units_up_to(h))?;
        if ![3, 5].contains(&self.s(3)) {
            return Err(fail(stage, format!("S(3) = {} is neither 3 nor 5", self.s(3))));
        }
        Ok(())
    }

    /// Columns `2^(h+1) | x`, `x ≠ 0`, that are not images of inputs below
    /// `2^(h+1)`, in increasing order.
    fn high_columns(&self, h: usize) -> Vec<u32> {
        let top = 1usize << (h + 1);
        let taken: BTreeSet<usize> = (0..top).map(|x| self.s(x)).collect();
        (1..top).map(|x| top | x).filter(|c| !taken.contains(c)).map(|c| c as u32).collect()
    }

    fn ensure_preimage_high(&mut self, h: usize) -> Result<()> {
        self.check_ladder("ensure_preimage_high", h)?;
        let top = 1usize << (h + 1);
        if self.inv(top) >= top {
            return Ok(());
        }
        if h < 2 {
            return Err(fail("ensure_preimage_high", "needs h >= 2"));
        }
        let c = *self
            .high_columns(h)
            .first()
            .ok_or_else(|| fail("ensure_preimage_high", "no admissible column"))?;
        self.cxor(Procedure::EnsurePreimageHigh { h }, h + 2, c & (top as u32 - 1), Side::Output);
        Ok(())
    }

    fn fix_power_point(&mut self, h: usize) -> Result<()> {
        self.check_ladder("fix_power_point", h)?;
        let top = 1usize << (h + 1);
        let pre = self.inv(top);
        if pre == top {
            return Ok(());
        }
        if pre < top {
            return Err(fail("fix_power_point", format!("S⁻¹({top}) = {pre} is below {top}")));
        }
        let mut images: Vec<(usize, u32)> = (0..=h).map(|i| (i, 1u32 << i)).collect();
        images.push((h + 1, pre as u32));
        let m = complete_images(self.n(), &images)?;
        self.linear(Procedure::FixPowerPoint { h }, Op::Linear, m, Side::Input);
        Ok(())
    }

    /// Smallest reachable image of `2^h + 1` of the form `2^(h+1) + t` by a
    /// `CXOR(h+2, ·)` that keeps `S⁻¹(2^(h+1)) ≥ 2^(h+1)`. `t` stays below `limit`.
    fn bound_by_cxor(&mut self, procedure: Procedure, h: usize, limit: u32) -> Result<()> {
        let top = 1u32 << (h + 1);
        let x = (1usize << h) + 1;
        let low = self.s(x) as u32 ^ top;
        let taken: BTreeSet<u32> = (0..top as usize).map(|k| self.s(k) as u32).collect();
        let t = (0..limit)
            .find(|&t| !taken.contains(&(top | (low ^ t))))
            .ok_or_else(|| fail("bound_power_plus_one", format!("no admissible cxor for S({x})")))?;
        if low ^ t != 0 {
            self.cxor(procedure, h + 2, low ^ t, Side::Output);
        }
        Ok(())
    }

    fn bound_power_plus_one(&mut self, h: usize) -> Result<()> {
        const STAGE: &str = "bound_power_plus_one";
        let n = self.n();
        if h < 2 || h >= n {
            return Err(fail(STAGE, format!("needs 2 <= h < n (h={h}, n={n})")));
        }
        self.require_fixed(STAGE, Self::units_up_to(h))?;
        let p = Procedure::BoundPowerPlusOne { h };
        let x = (1usize << h) + 1;
        let top = 1usize << (h + 1);
        let bound = power_plus_one_bound(h) as usize;
        let settled = |w: &Work| {
            let v = w.s(x);
            // A later preimage fix would disturb values at or above 2^(h+1).
            v <= bound && (v < top || h + 1 >= n || w.inv(top) >= top)
        };
        if settled(self) {
            return Ok(());
        }
        while self.s(x) >= 2 * top {
            let v = self.s(x) as u32;
            self.msb_shift(p, v);
        }
        let limit = if h == 2 { 4 } else { (bound - top + 1) as u32 };
        self.bound_by_cxor(p, h, limit)?;
        if !settled(self) {
            return Err(fail(STAGE, format!("S({x}) = {} exceeds {bound}", self.s(x))));
        }
        Ok(())
    }

    fn refine_five(&mut self) -> Result<()> {
        const STAGE: &str = "refine_apn_s5";
        const P: Procedure = Procedure::RefineFive;
        let n = self.n();
        if n < 3 {
            return Err(fail(STAGE, "needs n >= 3"));
        }
        self.require_fixed(STAGE, [0, 1, 2, 4])?;
        if self.s(3) != 5 {
            return Err(fail(STAGE, format!("expected S(3) = 5, found {}", self.s(3))));
        }
        let du = analysis::differential_profile(&self.cur).du;
        if du > 4 {
            return Err(fail(STAGE, format!("differential uniformity {du} exceeds 4")));
        }
        if self.s(5) == 7 {
            // Swap the two low bits on both sides: 3 ↦ 6, 6 ↦ 7.
            let mut images: Vec<u32> = (0..n).map(|k| 1 << k).collect();
            images.swap(0, 1);
            let swap = BitMatrix::from_images(n, &images);
            self.linear(P, Op::BitSwap, swap.clone(), Side::Input);
            self.linear(P, Op::BitSwap, swap, Side::Output);
            self.cxor(P, 3, 0b11, Side::Output);
            let pre4 = self.inv(4) as u32;
            let m = complete_images(n, &[(0, 1), (1, 2), (2, pre4)])?;
            self.linear(P, Op::Linear, m, Side::Input);
        }
        if n >= 4 {
            self.bound_power_plus_one(2)?;
        }
        if du == 2 && n >= 4 {
            if self.s(5) == 9 {
                // S(6), S(7) cannot both lie in {10, 11}.
                let taken: Vec<usize> = (0..8).map(|k| self.s(k)).collect();
                let a = [0b011u32, 0b010]
                    .into_iter()
                    .find(|&a| !taken.contains(&(8 ^ a as usize)))
                    .ok_or_else(|| fail(STAGE, "both S(6) and S(7) lie in {10, 11}"))?;
                self.cxor(P, 4, a, Side::Output);
            }
            if self.s(5) == 11 {
                if self.s(6) != 9 {
                    self.cxor(P, 4, 0b001, Side::Output);
                } else {
                    self.translate(P, 1, Side::Input);
                    self.translate(P, 1, Side::Output);
                    self.cxor(P, 2, 1, Side::Input);
                    self.cxor(P, 2, 1, Side::Output);
                    self.cxor(P, 3, 0b01, Side::Output);
                    self.cxor(P, 3, 0b01, Side::Input);
                    self.cxor(P, 4, 0b001, Side::Output);
                }
            }
        }
        let v = self.s(5);
        let ok = if du == 2 { v == 6 || v == 10 } else { [3, 6, 9, 10, 11].contains(&v) };
        if !ok || (v >= 8 && self.inv(8) < 8) {
            return Err(fail(STAGE, format!("S(5) = {v} outside the admissible set")));
        }
        Ok(())
    }

    fn pipeline(&mut self) -> Result<()> {
        let n = self.n();
        if n < 3 {
            return Err(fail("normalize", format!("needs n >= 3, got {n}")));
        }
        self.fix_zero(ZeroFix::OutputXor);
        self.fix_units(Side::Output)?;
        self.set_s3()?;
        self.fix_power_point(1)?;
        for h in 2..n {
            if h == 2 && self.s(3) == 5 && analysis::differential_profile(&self.cur).du <= 4 {
                self.refine_five()?;
            } else {
                self.bound_power_plus_one(h)?;
            }
            if h + 1 < n {
                self.ensure_preimage_high(h)?;
                self.fix_power_point(h)?;
            }
        }
        Ok(())
    }
}

/// Moves `S(0)` to 0 by a translation on the chosen side.
pub fn fix_zero(s: &SBox, how: ZeroFix) -> Result<Step> {
    let mut w = Work::new(s)?;
    w.fix_zero(how);
    Ok(w.finish())
}

/// Fixes 1 and 2 with a linear map, `M·S` on the output side or `S·M` on the
/// input side. Needs `S(0) = 0`.
pub fn fix_units(s: &SBox, side: Side) -> Result<Step> {
    let mut w = Work::new(s)?;
    w.fix_units(side)?;
    Ok(w.finish())
}

/// Sets `S(3) = 5` while keeping 0, 1, 2 fixed. A box with `S(3) = 3` and
/// differential uniformity above 4 is returned unchanged.
pub fn set_s3(s: &SBox) -> Result<Step> {
    let mut w = Work::new(s)?;
    w.set_s3()?;
    Ok(w.finish())
}

/// Admissible columns for [`ensure_preimage_high`], smallest first.
pub fn preimage_high_columns(s: &SBox, h: usize) -> Result<Vec<u32>> {
    let w = Work::new(s)?;
    w.check_ladder("preimage_high_columns", h)?;
    Ok(w.high_columns(h))
}

/// Makes `S⁻¹(2^(h+1)) ≥ 2^(h+1)` with an output `CXOR(h+2, ·)`, leaving the
/// images of all inputs below `2^(h+1)` untouched.
pub fn ensure_preimage_high(s: &SBox, h: usize) -> Result<Step> {
    let mut w = Work::new(s)?;
    w.ensure_preimage_high(h)?;
    Ok(w.finish())
}

/// Fixes `2^(h+1)` with an input-side linear map that is the identity below
/// `2^(h+1)`.
pub fn fix_power_point(s: &SBox, h: usize) -> Result<Step> {
    let mut w = Work::new(s)?;
    w.fix_power_point(h)?;
    Ok(w.finish())
}

/// Brings `S(2^h + 1)` under [`power_plus_one_bound`] with output-side
/// shifts, keeping the preimage of `2^(h+1)` at or above `2^(h+1)`.
pub fn bound_power_plus_one(s: &SBox, h: usize) -> Result<Step> {
    let mut w = Work::new(s)?;
    w.bound_power_plus_one(h)?;
    Ok(w.finish())
}

/// Narrows `S(5)` for boxes fixing 0, 1, 2, 4 with `S(3) = 5`: to `{6, 10}`
/// when APN, to `{3, 6, 9, 10, 11}` when the uniformity is 4.
pub fn refine_apn_s5(s: &SBox) -> Result<Step> {
    let mut w = Work::new(s)?;
    w.refine_five()?;
    Ok(w.finish())
}

pub fn normalize(s: &SBox) -> Result<NormalizationReport> {
    let mut w = Work::new(s)?;
    w.pipeline()?;
    let step = w.finish();
    Ok(NormalizationReport {
        checklist: checklist(&step.result),
        result: step.result,
        certificate: step.certificate,
        stage_log: step.stages,
    })
}

/// Normalizes `trials` random affine images of `s` and collects the distinct
/// results. The first trial uses `s` itself.
pub fn sample_normal_forms(s: &SBox, trials: usize, seed: u64) -> Result<BTreeSet<Vec<u8>>> {
    let n = s.n() as usize;
    let mut r = rng::seeded(seed);
    let mut out = BTreeSet::new();
    for t in 0..trials {
        let image = if t == 0 {
            s.clone()
        } else {
            let a = random_invertible(n, &mut r);
            let b = random_invertible(n, &mut r);
            let mask = (1usize << n) - 1;
            let (cx, cy) = (r.gen::<usize>() & mask, r.gen::<usize>() & mask);
            s.apply_affine(Some(&a), Some(&b), cy, cx)?
        };
        out.insert(normalize(&image)?.result.into_table());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn cxor_examples() {
        let m = cxor_matrix(3, 3, &[1, 0]).unwrap();
        assert_eq!(m.apply(4), 6);
        for v in 0..4 {
            assert_eq!(m.apply(v), v);
        }
        assert!(cxor_matrix(5, 4, &[0, 0, 0]).unwrap().is_identity());
        assert_eq!(cxor_matrix(4, 3, &[0, 1]).unwrap().apply(5), 4);
        assert!(cxor_matrix(4, 1, &[]).is_err());
        assert!(cxor_matrix(4, 3, &[1]).is_err());
    }

    #[test]
    fn msb_shift_examples() {
        let m = msb_shift_matrix(4, 12).unwrap();
        assert!(m.is_invertible());
        assert_eq!(m.apply(12), 4);
        assert_eq!(m.apply(4), 8);
        for v in 0..4 {
            assert_eq!(m.apply(v), v);
        }
        assert!(msb_shift_matrix(4, 1).is_err());
        for v in 2..64u32 {
            let m = msb_shift_matrix(6, v).unwrap();
            assert!(m.is_invertible());
            assert!(m.apply(v) < v);
        }
    }

    #[test]
    fn ctc_zero_fix() {
        let st = fix_zero(&fixtures::ctc(), ZeroFix::OutputXor).unwrap();
        assert_eq!(st.result.table(), &[0, 1, 7, 3, 5, 2, 6, 4]);
        assert!(st.certificate.verify());
        let st = fix_zero(&fixtures::ctc(), ZeroFix::InputShift).unwrap();
        assert_eq!(st.result.get(0), 0);
        assert!(st.certificate.verify());
    }

    #[test]
    fn unit_fix_both_sides() {
        for seed in 0..20 {
            let s = SBox::random_bijection(4, seed).unwrap();
            let s = fix_zero(&s, ZeroFix::OutputXor).unwrap().result;
            for side in [Side::Output, Side::Input] {
                let st = fix_units(&s, side).unwrap();
                assert_eq!((st.result.get(1), st.result.get(2)), (1, 2));
                assert!(st.certificate.verify());
            }
        }
    }

    #[test]
    fn s3_from_thirteen() {
        // 0,1,2 fixed, 3 ↦ 13
        let mut t: Vec<u8> = vec![0, 1, 2, 13];
        t.extend((3..16u8).filter(|&v| v != 13));
        let s = SBox::from_table(t).unwrap();
        let st = set_s3(&s).unwrap();
        assert_eq!(&st.result.table()[..4], &[0, 1, 2, 5]);
        assert_eq!(st.stages.iter().filter(|s| matches!(s.op, Op::MsbShift { .. })).count(), 1);
    }

    #[test]
    fn normalize_apn_cube() {
        let s = fixtures::power_map(5, 3).unwrap();
        let rep = normalize(&s).unwrap();
        assert!(rep.checklist.all(), "{:?} {:?}", rep.checklist, rep.result);
        assert!(rep.certificate.verify());
        assert_eq!(rep.result.get(3), 5);
        assert!([6, 10].contains(&rep.result.get(5)));
    }

    #[test]
    fn normalize_random_boxes() {
        for n in 3..=6u32 {
            for seed in 0..30 {
                let s = SBox::random_bijection(n, seed).unwrap();
                let rep = normalize(&s).unwrap();
                assert!(rep.checklist.all(), "n={n} seed={seed} {:?} {:?}", rep.checklist, rep.result);
                assert!(rep.certificate.verify());
            }
        }
    }

    #[test]
    fn normal_form_sampling() {
        let s = fixtures::power_map(5, 3).unwrap();
        assert_eq!(sample_normal_forms(&s, 1, 3).unwrap().len(), 1);
        for t in sample_normal_forms(&s, 10, 3).unwrap() {
            assert!(checklist(&SBox::from_table(t).unwrap()).all());
        }
    }
}

#![allow(dead_code)]

use num_complex::Complex64 as C;
use plateau::circuit::{Gate, Generator, Observable, ParamCircuit, ParamRef};
use plateau::pauli::{CliffordGate, CliffordKind, Pauli1, PauliWord};
use rand::Rng;

pub type Mat = Vec<Vec<C>>;

pub fn zeros(d: usize) -> Mat {
    vec![vec![C::new(0.0, 0.0); d]; d]
}

pub fn eye(d: usize) -> Mat {
    let mut m = zeros(d);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = C::new(1.0, 0.0);
    }
    m
}

pub fn mul(a: &Mat, b: &Mat) -> Mat {
    let d = a.len();
    let mut m = zeros(d);
    for i in 0..d {
        for k in 0..d {
            if a[i][k] == C::new(0.0, 0.0) {
                continue;
            }
            for j in 0..d {
                m[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    m
}

pub fn dagger(a: &Mat) -> Mat {
    let d = a.len();
    let mut m = zeros(d);
    for i in 0..d {
        for j in 0..d {
            m[i][j] = a[j][i].conj();
        }
    }
    m
}

pub fn max_diff(a: &Mat, b: &Mat) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn sigma(p: Pauli1) -> [[C; 2]; 2] {
    let (o, l, i) = (C::new(0.0, 0.0), C::new(1.0, 0.0), C::new(0.0, 1.0));
    match p {
        Pauli1::I => [[l, o], [o, l]],
        Pauli1::X => [[o, l], [l, o]],
        Pauli1::Y => [[o, -i], [i, o]],
        Pauli1::Z => [[l, o], [o, -l]],
    }
}

/// Dense matrix of a Pauli word including its phase; qubit q is bit q of the basis index.
pub fn pauli_matrix(w: &PauliWord) -> Mat {
    let n = w.num_qubits();
    let d = 1 << n;
    let phase = C::new(0.0, 1.0).powu(w.phase_pow() as u32);
    let mut m = zeros(d);
    for r in 0..d {
        for c in 0..d {
            let mut v = phase;
            for q in 0..n {
                v *= sigma(w.get(q))[(r >> q) & 1][(c >> q) & 1];
            }
            m[r][c] = v;
        }
    }
    m
}

/// Embeds a 2-qubit matrix (local index = bit(a) + 2·bit(b)) acting on wires a, b.
pub fn embed2(op: &[[C; 4]; 4], a: usize, b: usize, n: usize) -> Mat {
    let d = 1 << n;
    let mut m = zeros(d);
    let mask = (1 << a) | (1 << b);
    for r in 0..d {
        for c in 0..d {
            if r & !mask != c & !mask {
                continue;
            }
            let lr = ((r >> a) & 1) | (((r >> b) & 1) << 1);
            let lc = ((c >> a) & 1) | (((c >> b) & 1) << 1);
            m[r][c] = op[lr][lc];
        }
    }
    m
}

pub fn embed1(op: &[[C; 2]; 2], a: usize, n: usize) -> Mat {
    let d = 1 << n;
    let mut m = zeros(d);
    for r in 0..d {
        for c in 0..d {
            if r & !(1 << a) != c & !(1 << a) {
                continue;
            }
            m[r][c] = op[(r >> a) & 1][(c >> a) & 1];
        }
    }
    m
}

pub fn clifford_matrix(g: &CliffordGate, n: usize) -> Mat {
    let (o, l, i) = (C::new(0.0, 0.0), C::new(1.0, 0.0), C::new(0.0, 1.0));
    let h = C::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let q = g.qubits();
    match g.kind {
        CliffordKind::H => embed1(&[[h, h], [h, -h]], q[0], n),
        CliffordKind::S => embed1(&[[l, o], [o, i]], q[0], n),
        CliffordKind::Sdg => embed1(&[[l, o], [o, -i]], q[0], n),
        CliffordKind::X => embed1(&sigma(Pauli1::X), q[0], n),
        CliffordKind::Y => embed1(&sigma(Pauli1::Y), q[0], n),
        CliffordKind::Z => embed1(&sigma(Pauli1::Z), q[0], n),
        // control = q[0] (local bit 0), target = q[1] (local bit 1)
        CliffordKind::CNOT => embed2(&[[l, o, o, o], [o, o, o, l], [o, o, l, o], [o, l, o, o]], q[0], q[1], n),
        CliffordKind::CZ => embed2(&[[l, o, o, o], [o, l, o, o], [o, o, l, o], [o, o, o, -l]], q[0], q[1], n),
        CliffordKind::SWAP => embed2(&[[l, o, o, o], [o, o, l, o], [o, l, o, o], [o, o, o, l]], q[0], q[1], n),
    }
}

/// `exp(-i θ/2 G)`.
pub fn rotation_matrix(g: &PauliWord, theta: f64) -> Mat {
    let p = pauli_matrix(g);
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let d = p.len();
    let mut m = zeros(d);
    for r in 0..d {
        for k in 0..d {
            m[r][k] = C::new(0.0, -s) * p[r][k];
        }
        m[r][r] += c;
    }
    m
}

/// Local 2x2 / 4x4 matrix of a Clifford gate (local index = bit of q[0] + 2·bit of q[1]).
fn clifford_local(g: &CliffordGate) -> Vec<Vec<C>> {
    let m = clifford_matrix(&CliffordGate::new(g.kind, if g.kind.arity() == 1 { &[0] } else { &[0, 1] }).unwrap(), g.kind.arity());
    m
}

/// `P|ψ⟩` for a Pauli word with phase.
pub fn apply_pauli(w: &PauliWord, psi: &[C]) -> Vec<C> {
    let n = w.num_qubits();
    let (mut x, mut z, mut ny) = (0usize, 0usize, 0u32);
    for q in 0..n {
        match w.get(q) {
            Pauli1::I => {}
            Pauli1::X => x |= 1 << q,
            Pauli1::Z => z |= 1 << q,
            Pauli1::Y => {
                x |= 1 << q;
                z |= 1 << q;
                ny += 1;
            }
        }
    }
    let base = C::new(0.0, 1.0).powu((ny + w.phase_pow() as u32) % 4);
    let mut out = vec![C::new(0.0, 0.0); psi.len()];
    for (b, amp) in psi.iter().enumerate() {
        // σ|b⟩ per site: X|b⟩=|b⊕1⟩, Z|b⟩=(−1)^b|b⟩, Y = iXZ
        let sign = if (b & z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        out[b ^ x] += base * sign * amp;
    }
    out
}

/// Brute-force loss `⟨ψ|U† O U|ψ⟩` by statevector evolution; every input Bloch vector must be pure.
pub fn dense_loss(c: &ParamCircuit, obs: &Observable, angles: &[f64]) -> f64 {
    let n = c.n_qubits();
    let d = 1 << n;
    let mut psi = vec![C::new(1.0, 0.0); d];
    for q in 0..n {
        let [x, y, z] = c.input.0[q].0;
        assert!((x * x + y * y + z * z - 1.0).abs() < 1e-12, "pure inputs only");
        let theta = z.clamp(-1.0, 1.0).acos();
        let phi = y.atan2(x);
        let a0 = C::new((theta / 2.0).cos(), 0.0);
        let a1 = C::from_polar((theta / 2.0).sin(), phi);
        for (b, amp) in psi.iter_mut().enumerate() {
            *amp *= if (b >> q) & 1 == 0 { a0 } else { a1 };
        }
    }
    for g in &c.gates {
        match g {
            Gate::Clifford(cg) => {
                let local = clifford_local(cg);
                let qs = cg.qubits();
                let mut out = vec![C::new(0.0, 0.0); d];
                for (b, amp) in psi.iter().enumerate() {
                    let lc = qs.iter().enumerate().map(|(i, &q)| ((b >> q) & 1) << i).sum::<usize>();
                    for (lr, row) in local.iter().enumerate() {
                        let v = row[lc];
                        if v == C::new(0.0, 0.0) {
                            continue;
                        }
                        let mut r = b;
                        for (i, &q) in qs.iter().enumerate() {
                            r = (r & !(1 << q)) | (((lr >> i) & 1) << q);
                        }
                        out[r] += v * amp;
                    }
                }
                psi = out;
            }
            Gate::Rotation { generator, param } => {
                let theta = match param {
                    ParamRef::Free(j) => angles[*j],
                    ParamRef::Fixed(a) => *a,
                };
                let pp = apply_pauli(&generator.to_word(n).unwrap(), &psi);
                let (cs, sn) = ((theta / 2.0).cos(), (theta / 2.0).sin());
                for (a, b) in psi.iter_mut().zip(pp) {
                    *a = *a * cs + C::new(0.0, -sn) * b;
                }
            }
        }
    }
    let mut total = 0.0;
    for (coef, p) in obs.terms() {
        let pp = apply_pauli(&p.resized(n).unwrap(), &psi);
        let e: C = psi.iter().zip(&pp).map(|(a, b)| a.conj() * b).sum();
        total += coef * e.re;
    }
    total
}

pub fn random_pauli1<R: Rng>(rng: &mut R) -> Pauli1 {
    Pauli1::from_code(rng.gen_range(1..4))
}

/// Random Clifford + free-rotation circuit on `n` qubits with exactly `m` free rotations.
pub fn random_pqc<R: Rng>(rng: &mut R, n: usize, m: usize, clifford_rate: f64) -> ParamCircuit {
    let mut c = ParamCircuit::new(n);
    let mut placed = 0;
    while placed < m {
        if rng.gen::<f64>() < clifford_rate {
            let kind = CliffordKind::ALL[rng.gen_range(0..CliffordKind::ALL.len())];
            if kind.arity() == 2 && n < 2 {
                continue;
            }
            let a = rng.gen_range(0..n);
            let qs = if kind.arity() == 2 {
                let mut b = rng.gen_range(0..n - 1);
                if b >= a {
                    b += 1;
                }
                vec![a, b]
            } else {
                vec![a]
            };
            c.push(Gate::Clifford(CliffordGate::new(kind, &qs).unwrap()));
        } else {
            let two = n > 1 && rng.gen_bool(0.4);
            let a = rng.gen_range(0..n);
            let g = if two {
                let mut b = rng.gen_range(0..n - 1);
                if b >= a {
                    b += 1;
                }
                Generator::two(a, random_pauli1(rng), b, random_pauli1(rng)).unwrap()
            } else {
                Generator::one(a, random_pauli1(rng)).unwrap()
            };
            c.push_free(g);
            placed += 1;
        }
    }
    c
}

pub fn random_word<R: Rng>(rng: &mut R, n: usize) -> PauliWord {
    loop {
        let mut w = PauliWord::identity(n);
        for q in 0..n {
            if rng.gen_bool(0.5) {
                w.set(q, random_pauli1(rng));
            }
        }
        if !w.is_identity() {
            return w;
        }
    }
}

/// Random observable with up to `max_terms` distinct terms and nonzero coefficients.
pub fn random_observable<R: Rng>(rng: &mut R, n: usize, max_terms: usize) -> Observable {
    let k = rng.gen_range(1..=max_terms.min((1 << (2 * n)) - 1));
    let mut terms: Vec<(f64, PauliWord)> = Vec::new();
    while terms.len() < k {
        let w = random_word(rng, n);
        if terms.iter().any(|(_, t)| *t == w) {
            continue;
        }
        let mut coef: f64 = rng.gen_range(-1.0..1.0);
        if coef.abs() < 0.1 {
            coef = 0.5;
        }
        terms.push((coef, w));
    }
    Observable::new(n, terms).unwrap()
}

pub const PAULIS: [Pauli1; 4] = [Pauli1::I, Pauli1::X, Pauli1::Y, Pauli1::Z];

/// Case analysis of the gadget in the Heisenberg picture, written out by hand.
/// Returns (ancilla, system) letters for output `I ⊗ p`.
pub fn case_table(p: Pauli1, k: (u8, u8, u8)) -> (Pauli1, Pauli1) {
    use Pauli1::*;
    let (o1, o2, o3) = (k.0 % 2 == 1, k.1 % 2 == 1, k.2 % 2 == 1);
    match p {
        I => (I, I),
        X => match (o3, o2) {
            (true, true) => (X, I),
            (false, false) => (I, X),
            (false, true) => (Y, Z),
            (true, false) => (Z, Y),
        },
        Y => match (o3, o1) {
            (true, true) => (Y, I),
            (false, false) => (I, Y),
            (false, true) => (X, Z),
            (true, false) => (Z, X),
        },
        Z => match (o2, o1) {
            (true, true) => (Z, I),
            (false, false) => (I, Z),
            (false, true) => (X, Y),
            (true, false) => (Y, X),
        },
    }
}

/// Dense Heisenberg propagation through R_ZZ, R_YY, R_XX, identified by trace overlap.
pub fn dense_backprop(p: Pauli1, k: (u8, u8, u8)) -> (Pauli1, Pauli1) {
    let mut op = pauli_matrix(&PauliWord::single(2, 1, p).unwrap());
    for (g, turns) in [(Pauli1::Z, k.2), (Pauli1::Y, k.1), (Pauli1::X, k.0)] {
        let r = rotation_matrix(&PauliWord::from_sparse(2, &[(0, g), (1, g)]).unwrap(), turns as f64 * std::f64::consts::FRAC_PI_2);
        op = mul(&mul(&dagger(&r), &op), &r);
    }
    for a in PAULIS {
        for s in PAULIS {
            let q = pauli_matrix(&PauliWord::from_sparse(2, &[(0, a), (1, s)]).unwrap());
            let overlap: C = (0..4).map(|i| (0..4).map(|j| q[i][j].conj() * op[i][j]).sum::<C>()).sum();
            if (overlap.norm() - 4.0).abs() < 1e-9 {
                return (a, s);
            }
        }
    }
    panic!("dense propagation left the Pauli group");
}

//! Postfix evaluation of expression trees over batches of points.
//!
//! A single-point evaluation is a batch of length one, so scalar and grid
//! evaluation share one code path and agree bit for bit.

use super::ast::{BinOp, Func, Node, Var};
use super::EvalError;

#[derive(Clone, Debug, PartialEq)]
enum Instr {
    Const(f64),
    X(usize),
    T,
    Neg,
    Bin(BinOp),
    PowI(i32),
    Call(Func),
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Tape {
    code: Vec<Instr>,
}

/// Stack slot: a value that is uniform over the batch stays scalar.
enum Slot {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Tape {
    pub(crate) fn compile(root: &Node) -> Tape {
        let mut code = Vec::with_capacity(root.size());
        emit(root, &mut code);
        Tape { code }
    }

    /// Evaluate at `n` points; `coords[i]` is the column of `x_{i+1}` values.
    pub(crate) fn eval(&self, coords: &[&[f64]], n: usize, t: f64, out: &mut [f64]) -> Result<(), EvalError> {
        debug_assert_eq!(out.len(), n);
        let mut stack: Vec<Slot> = Vec::with_capacity(8);
        for ins in &self.code {
            match ins {
                Instr::Const(c) => stack.push(Slot::Scalar(*c)),
                Instr::T => stack.push(Slot::Scalar(t)),
                Instr::X(i) => {
                    let col = coords.get(*i).ok_or(EvalError::MissingVariable(Var::X(*i)))?;
                    debug_assert!(col.len() >= n);
                    stack.push(Slot::Vector(col[..n].to_vec()));
                }
                Instr::Neg => {
                    let a = stack.pop().expect("tape underflow");
                    stack.push(map1(a, |x| -x));
                }
                Instr::PowI(k) => {
                    let a = stack.pop().expect("tape underflow");
                    let k = *k;
                    if k < 0 && any(&a, |x| x == 0.0) {
                        return Err(EvalError::DivisionByZero);
                    }
                    stack.push(map1(a, |x| x.powi(k)));
                }
                Instr::Bin(op) => {
                    let b = stack.pop().expect("tape underflow");
                    let a = stack.pop().expect("tape underflow");
                    stack.push(binary(*op, a, b)?);
                }
                Instr::Call(f) => {
                    let v = if f.arity() == 2 {
                        let b = stack.pop().expect("tape underflow");
                        let a = stack.pop().expect("tape underflow");
                        match f {
                            Func::Min => map2(a, b, |x, y| if x <= y { x } else { y }),
                            _ => map2(a, b, |x, y| if x >= y { x } else { y }),
                        }
                    } else {
                        let a = stack.pop().expect("tape underflow");
                        unary(*f, a)?
                    };
                    stack.push(v);
                }
            }
        }
        let result = stack.pop().expect("empty tape");
        match result {
            Slot::Scalar(v) => out.fill(v),
            Slot::Vector(v) => out.copy_from_slice(&v),
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(EvalError::NonFinite);
        }
        Ok(())
    }
}

fn emit(node: &Node, code: &mut Vec<Instr>) {
    match node {
        Node::Const(c) => code.push(Instr::Const(*c)),
        Node::Var(Var::X(i)) => code.push(Instr::X(*i)),
        Node::Var(Var::T) => code.push(Instr::T),
        Node::Neg(a) => {
            emit(a, code);
            code.push(Instr::Neg);
        }
        Node::Binary(BinOp::Pow, a, b) => {
            emit(a, code);
            match b.as_const() {
                Some(k) if k.fract() == 0.0 && k.abs() <= 64.0 => code.push(Instr::PowI(k as i32)),
                _ => {
                    emit(b, code);
                    code.push(Instr::Bin(BinOp::Pow));
                }
            }
        }
        Node::Binary(op, a, b) => {
            emit(a, code);
            emit(b, code);
            code.push(Instr::Bin(*op));
        }
        Node::Call(f, args) => {
            for a in args {
                emit(a, code);
            }
            code.push(Instr::Call(*f));
        }
    }
}

fn any(a: &Slot, pred: impl Fn(f64) -> bool) -> bool {
    match a {
        Slot::Scalar(x) => pred(*x),
        Slot::Vector(v) => v.iter().any(|&x| pred(x)),
    }
}

fn map1(a: Slot, f: impl Fn(f64) -> f64) -> Slot {
    match a {
        Slot::Scalar(x) => Slot::Scalar(f(x)),
        Slot::Vector(mut v) => {
            v.iter_mut().for_each(|x| *x = f(*x));
            Slot::Vector(v)
        }
    }
}

fn map2(a: Slot, b: Slot, f: impl Fn(f64, f64) -> f64) -> Slot {
    match (a, b) {
        (Slot::Scalar(x), Slot::Scalar(y)) => Slot::Scalar(f(x, y)),
        (Slot::Vector(mut v), Slot::Scalar(y)) => {
            v.iter_mut().for_each(|x| *x = f(*x, y));
            Slot::Vector(v)
        }
        (Slot::Scalar(x), Slot::Vector(mut w)) => {
            w.iter_mut().for_each(|y| *y = f(x, *y));
            Slot::Vector(w)
        }
        (Slot::Vector(mut v), Slot::Vector(w)) => {
            v.iter_mut().zip(&w).for_each(|(x, &y)| *x = f(*x, y));
            Slot::Vector(v)
        }
    }
}

fn binary(op: BinOp, a: Slot, b: Slot) -> Result<Slot, EvalError> {
    Ok(match op {
        BinOp::Add => map2(a, b, |x, y| x + y),
        BinOp::Sub => map2(a, b, |x, y| x - y),
        BinOp::Mul => map2(a, b, |x, y| x * y),
        BinOp::Div => {
            if any(&b, |y| y == 0.0) {
                return Err(EvalError::DivisionByZero);
            }
            map2(a, b, |x, y| x / y)
        }
        BinOp::Pow => {
            let r = map2(a, b, f64::powf);
            if any(&r, f64::is_nan) {
                return Err(EvalError::Domain("pow"));
            }
            r
        }
    })
}

fn unary(f: Func, a: Slot) -> Result<Slot, EvalError> {
    Ok(match f {
        Func::Sin => map1(a, f64::sin),
        Func::Cos => map1(a, f64::cos),
        Func::Exp => map1(a, f64::exp),
        Func::Tanh => map1(a, f64::tanh),
        Func::Abs => map1(a, f64::abs),
        Func::Sqrt => {
            if any(&a, |x| x < 0.0) {
                return Err(EvalError::Domain("sqrt"));
            }
            map1(a, f64::sqrt)
        }
        Func::Log => {
            if any(&a, |x| x <= 0.0) {
                return Err(EvalError::Domain("log"));
            }
            map1(a, f64::ln)
        }
        Func::Sign => map1(a, |x| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        }),
        Func::Step => map1(a, |x| if x >= 0.0 { 1.0 } else { 0.0 }),
        Func::Min | Func::Max => unreachable!("binary function dispatched as unary"),
    })
}

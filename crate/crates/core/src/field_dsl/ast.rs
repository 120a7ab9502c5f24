use std::fmt;

/// Independent variable of a space-time field: `x1..xN` (stored zero-based) or `t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    X(usize),
    T,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X(i) => write!(f, "x{}", i + 1),
            Var::T => f.write_str("t"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

/// Built-in functions.
///
/// `sign` and `step` are mostly produced by differentiation (of `abs`, `min`,
/// `max`) but are parseable so that printed derivatives round-trip.
/// `step(0) = 1`, `sign(0) = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
    Tanh,
    Log,
    Sign,
    Step,
    Min,
    Max,
}

impl Func {
    pub const ALL: [Func; 11] = [
        Func::Sin,
        Func::Cos,
        Func::Exp,
        Func::Sqrt,
        Func::Abs,
        Func::Tanh,
        Func::Log,
        Func::Sign,
        Func::Step,
        Func::Min,
        Func::Max,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Tanh => "tanh",
            Func::Log => "log",
            Func::Sign => "sign",
            Func::Step => "step",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }
}

/// Expression tree node.
#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Const(f64),
    Var(Var),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

impl Node {
    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Node::Const(_) => false,
            Node::Var(v) => *v == var,
            Node::Neg(a) => a.depends_on(var),
            Node::Binary(_, a, b) => a.depends_on(var) || b.depends_on(var),
            Node::Call(_, args) => args.iter().any(|a| a.depends_on(var)),
        }
    }

    /// Largest zero-based spatial index referenced, if any.
    pub fn max_space_index(&self) -> Option<usize> {
        match self {
            Node::Const(_) | Node::Var(Var::T) => None,
            Node::Var(Var::X(i)) => Some(*i),
            Node::Neg(a) => a.max_space_index(),
            Node::Binary(_, a, b) => a.max_space_index().max(b.max_space_index()),
            Node::Call(_, args) => args.iter().filter_map(Node::max_space_index).max(),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Node::Const(_) | Node::Var(_) => 1,
            Node::Neg(a) => 1 + a.size(),
            Node::Binary(_, a, b) => 1 + a.size() + b.size(),
            Node::Call(_, args) => 1 + args.iter().map(Node::size).sum::<usize>(),
        }
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    // Smart constructors with light constant folding. They keep derivative
    // trees from filling up with `0 * ...` and `1 * ...` terms.

    pub fn constant(c: f64) -> Node {
        Node::Const(c)
    }

    pub fn var(v: Var) -> Node {
        Node::Var(v)
    }

    pub fn neg(a: Node) -> Node {
        match a {
            Node::Const(c) => Node::Const(-c),
            Node::Neg(inner) => *inner,
            other => Node::Neg(Box::new(other)),
        }
    }

    pub fn add(a: Node, b: Node) -> Node {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Node::Const(x + y),
            (Some(x), _) if x == 0.0 => b,
            (_, Some(y)) if y == 0.0 => a,
            _ => Node::Binary(BinOp::Add, Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: Node, b: Node) -> Node {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Node::Const(x - y),
            (Some(x), _) if x == 0.0 => Node::neg(b),
            (_, Some(y)) if y == 0.0 => a,
            _ => Node::Binary(BinOp::Sub, Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: Node, b: Node) -> Node {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Node::Const(x * y),
            (Some(x), _) | (_, Some(x)) if x == 0.0 => Node::Const(0.0),
            (Some(x), _) if x == 1.0 => b,
            (_, Some(y)) if y == 1.0 => a,
            (Some(x), _) if x == -1.0 => Node::neg(b),
            (_, Some(y)) if y == -1.0 => Node::neg(a),
            _ => Node::Binary(BinOp::Mul, Box::new(a), Box::new(b)),
        }
    }

    pub fn div(a: Node, b: Node) -> Node {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) if y != 0.0 => Node::Const(x / y),
            (Some(x), _) if x == 0.0 => Node::Const(0.0),
            (_, Some(y)) if y == 1.0 => a,
            _ => Node::Binary(BinOp::Div, Box::new(a), Box::new(b)),
        }
    }

    pub fn pow(a: Node, b: Node) -> Node {
        match (a.as_const(), b.as_const()) {
            (_, Some(y)) if y == 0.0 => Node::Const(1.0),
            (_, Some(y)) if y == 1.0 => a,
            (Some(x), Some(y)) if x > 0.0 => Node::Const(x.powf(y)),
            _ => Node::Binary(BinOp::Pow, Box::new(a), Box::new(b)),
        }
    }

    pub fn call(f: Func, args: Vec<Node>) -> Node {
        debug_assert_eq!(args.len(), f.arity());
        Node::Call(f, args)
    }

    pub fn call1(f: Func, a: Node) -> Node {
        Node::Call(f, vec![a])
    }
}

impl fmt::Display for Node {
    /// Fully parenthesized output; `parse(format!("{node}"))` reproduces the tree
    /// (negative literals come back as a negated positive literal).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => {
                write!(f, "(-{:?})", -c)
            }
            Node::Const(c) => write!(f, "{c:?}"),
            Node::Var(v) => write!(f, "{v}"),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Node::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

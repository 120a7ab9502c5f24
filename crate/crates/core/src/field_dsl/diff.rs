use super::ast::{BinOp, Func, Node, Var};

/// Exact symbolic derivative of `node` with respect to `var`.
///
/// Kinks follow fixed conventions: `abs'(0) = 0` (through `sign`), and
/// `min`/`max` take the derivative of the first argument on ties.
pub(crate) fn derivative(node: &Node, var: Var) -> Node {
    if !node.depends_on(var) {
        return Node::Const(0.0);
    }
    match node {
        Node::Const(_) => Node::Const(0.0),
        Node::Var(v) => Node::Const(if *v == var { 1.0 } else { 0.0 }),
        Node::Neg(a) => Node::neg(derivative(a, var)),
        Node::Binary(op, a, b) => binary(*op, a, b, var),
        Node::Call(f, args) => call(*f, args, var),
    }
}

fn binary(op: BinOp, a: &Node, b: &Node, var: Var) -> Node {
    let da = || derivative(a, var);
    let db = || derivative(b, var);
    match op {
        BinOp::Add => Node::add(da(), db()),
        BinOp::Sub => Node::sub(da(), db()),
        BinOp::Mul => Node::add(Node::mul(da(), b.clone()), Node::mul(a.clone(), db())),
        BinOp::Div => {
            // a'/b - a b'/b^2
            let first = Node::div(da(), b.clone());
            if !b.depends_on(var) {
                return first;
            }
            let second = Node::div(Node::mul(a.clone(), db()), Node::pow(b.clone(), Node::Const(2.0)));
            Node::sub(first, second)
        }
        BinOp::Pow => {
            if !b.depends_on(var) {
                // b a^(b-1) a'
                let reduced = Node::pow(a.clone(), Node::sub(b.clone(), Node::Const(1.0)));
                Node::mul(Node::mul(b.clone(), reduced), da())
            } else if !a.depends_on(var) {
                // a^b ln(a) b'
                let lna = Node::call1(Func::Log, a.clone());
                Node::mul(Node::mul(Node::pow(a.clone(), b.clone()), lna), db())
            } else {
                // a^b (b' ln a + b a'/a)
                let lna = Node::call1(Func::Log, a.clone());
                let inner = Node::add(Node::mul(db(), lna), Node::div(Node::mul(b.clone(), da()), a.clone()));
                Node::mul(Node::pow(a.clone(), b.clone()), inner)
            }
        }
    }
}

fn call(f: Func, args: &[Node], var: Var) -> Node {
    let a = &args[0];
    let chain = |outer: Node| Node::mul(outer, derivative(a, var));
    match f {
        Func::Sin => chain(Node::call1(Func::Cos, a.clone())),
        Func::Cos => chain(Node::neg(Node::call1(Func::Sin, a.clone()))),
        Func::Exp => chain(Node::call1(Func::Exp, a.clone())),
        Func::Sqrt => Node::div(
            derivative(a, var),
            Node::mul(Node::Const(2.0), Node::call1(Func::Sqrt, a.clone())),
        ),
        Func::Abs => chain(Node::call1(Func::Sign, a.clone())),
        Func::Tanh => chain(Node::sub(
            Node::Const(1.0),
            Node::pow(Node::call1(Func::Tanh, a.clone()), Node::Const(2.0)),
        )),
        Func::Log => Node::div(derivative(a, var), a.clone()),
        Func::Sign | Func::Step => Node::Const(0.0),
        Func::Min | Func::Max => {
            let b = &args[1];
            // Selector is 1 where the first argument wins (ties included).
            let gap = if f == Func::Min {
                Node::sub(b.clone(), a.clone())
            } else {
                Node::sub(a.clone(), b.clone())
            };
            let first = Node::call1(Func::Step, gap);
            let second = Node::sub(Node::Const(1.0), first.clone());
            Node::add(
                Node::mul(first, derivative(a, var)),
                Node::mul(second, derivative(b, var)),
            )
        }
    }
}

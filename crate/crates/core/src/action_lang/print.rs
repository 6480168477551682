use std::fmt;

use super::{ActionDescription, Domain, FluentAtom, Value};

pub(super) fn format_atom(desc: &ActionDescription, atom: &FluentAtom) -> String {
    let decl = desc.fluent(atom.fluent);
    match desc.atom_value(atom) {
        Value::Bool(true) => decl.name.clone(),
        Value::Bool(false) => format!("~{}", decl.name),
        v => format!("{}={}", decl.name, v),
    }
}

fn write_atoms(
    f: &mut fmt::Formatter<'_>,
    desc: &ActionDescription,
    atoms: &[FluentAtom],
) -> fmt::Result {
    for (i, atom) in atoms.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        f.write_str(&format_atom(desc, atom))?;
    }
    Ok(())
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Bool => f.write_str("bool"),
            Domain::Range { lo, hi } => write!(f, "{lo}..{hi}"),
            Domain::Enum(values) => {
                f.write_str("{")?;
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("}")
            }
        }
    }
}

/// Prints the ground description in the same surface syntax the parser reads.
impl fmt::Display for ActionDescription {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for decl in self.fluents() {
            writeln!(f, "fluent {} : {}.", decl.name, decl.domain)?;
        }
        for action in self.actions() {
            writeln!(f, "action {action}.")?;
        }
        for law in self.statics() {
            f.write_str(&format_atom(self, &law.head))?;
            if !law.body.is_empty() {
                f.write_str(" if ")?;
                write_atoms(f, self, &law.body)?;
            }
            f.write_str(".\n")?;
        }
        for law in self.dynamics() {
            write!(
                f,
                "{} causes {}",
                self.action_name(law.action),
                format_atom(self, &law.effect)
            )?;
            if !law.preconditions.is_empty() {
                f.write_str(" if ")?;
                write_atoms(f, self, &law.preconditions)?;
            }
            f.write_str(".\n")?;
        }
        Ok(())
    }
}

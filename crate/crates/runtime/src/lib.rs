//! The experiment-scripting runtime.
//!
//! Scripts are written in a small brace-delimited language (assignments,
//! arithmetic, comparisons, `if`/`elif`/`else`, `while`, `for ... in`,
//! list and map literals, indexing and builtin calls). They run inside an
//! [`Environment`] whose `STATE` map persists across executions. Builtins
//! are grouped by capability, and only enabled groups are callable.
//!
//! ```
//! use hal_runtime::{Environment, Script};
//!
//! let mut env = Environment::new();
//! let script = Script::parse("STATE[\"n\"] = len([1, 2, 3])\nSIGNAL = \"counted \" + str(STATE[\"n\"])").unwrap();
//! let result = env.execute(&script);
//! assert_eq!(result.signal.as_deref(), Some("counted 3"));
//! assert_eq!(env.state()["n"].as_f64(), Some(3.0));
//! ```

pub mod ast;
pub mod builtins;
mod env;
mod error;
mod interp;
mod lexer;
mod parser;
mod value;

pub use builtins::{Builtin, BuiltinRegistry, CallContext, Group};
pub use env::{Budget, Environment, ExecutionResult, Host, Script, ScriptResolver, SIGNAL_KEY};
pub use error::{ErrorKind, Fault, RegistryError, RuntimeError, SyntaxError};
pub use lexer::is_keyword;
pub use parser::parse;
pub use value::{format_number, quote, Value};

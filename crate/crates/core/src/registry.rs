//! Name-keyed registries of games, kernels and data generators.
//!
//! Each family sits behind a trait object; a [`Selector`] from a config file
//! names the variant and carries its parameters.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use crate::error::{invalid, Error, Result};
use crate::experiment::generators::{Adversarial, Deterministic, Generator, IidLogistic, Replay};
use crate::game::{AbsoluteLoss, CustomConvex, Game, LogLoss, SquareLoss};
use crate::kernel::{DataRange, Gaussian, Kernel, Linear, Sobolev};

/// A registry name plus parameters, written in configs either as a bare string
/// (`"sobolev"`) or as an object with a `name` field
/// (`{"name": "gaussian", "width": 0.5}`).
#[derive(Debug, Clone, PartialEq)]
pub struct Selector {
    pub name: String,
    pub params: Map<String, Value>,
}

impl Selector {
    pub fn named(name: impl Into<String>) -> Self {
        Selector {
            name: name.into(),
            params: Map::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_f64()
                .ok_or_else(|| invalid(format!("{}: parameter {key} must be a number", self.name))),
        }
    }

    pub fn str(&self, key: &str) -> Result<&str> {
        self.params
            .get(key)
            .and_then(Value::as_str)
            .ok_or_else(|| invalid(format!("{}: missing string parameter {key}", self.name)))
    }

    /// Deserialises a parameter, or `None` when absent.
    pub fn get<T: serde::de::DeserializeOwned>(&self, key: &str) -> Result<Option<T>> {
        self.params
            .get(key)
            .map(|v| serde_json::from_value(v.clone()))
            .transpose()
            .map_err(|e| invalid(format!("{}: parameter {key}: {e}", self.name)))
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl Serialize for Selector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.params.is_empty() {
            return s.serialize_str(&self.name);
        }
        let mut m = Map::new();
        m.insert("name".into(), Value::String(self.name.clone()));
        m.extend(self.params.clone());
        Value::Object(m).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Selector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match Value::deserialize(d)? {
            Value::String(name) => Ok(Selector::named(name)),
            Value::Object(mut m) => {
                let name = match m.remove("name") {
                    Some(Value::String(n)) => n,
                    _ => return Err(D::Error::custom("selector object needs a string \"name\"")),
                };
                Ok(Selector { name, params: m })
            }
            other => Err(D::Error::custom(format!(
                "expected a name or an object, got {other}"
            ))),
        }
    }
}

pub type Builder<T> = Box<dyn Fn(&Selector) -> Result<Arc<T>> + Send + Sync>;

/// Builders for one family of trait objects, keyed by name.
pub struct Registry<T: ?Sized> {
    kind: &'static str,
    builders: BTreeMap<String, Builder<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn empty(kind: &'static str) -> Self {
        Registry {
            kind,
            builders: BTreeMap::new(),
        }
    }

    /// Adds or replaces the builder for `name`.
    pub fn register(
        &mut self,
        name: impl Into<String>,
        builder: impl Fn(&Selector) -> Result<Arc<T>> + Send + Sync + 'static,
    ) -> &mut Self {
        self.builders.insert(name.into(), Box::new(builder));
        self
    }

    pub fn build(&self, sel: &Selector) -> Result<Arc<T>> {
        let b = self
            .builders
            .get(&sel.name)
            .ok_or_else(|| Error::UnknownName {
                kind: self.kind,
                name: sel.name.clone(),
            })?;
        b(sel)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.builders.keys().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.builders.contains_key(name)
    }
}

impl<T: ?Sized> fmt::Debug for Registry<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("names", &self.builders.keys().collect::<Vec<_>>())
            .finish()
    }
}

pub type GameRegistry = Registry<dyn Game>;
pub type KernelRegistry = Registry<dyn Kernel>;
pub type GeneratorRegistry = Registry<dyn Generator>;

/// `square`, `absolute`, `log`, and `custom` (parameter `boundary`).
pub fn games() -> GameRegistry {
    let mut r = GameRegistry::empty("game");
    r.register("square", |_| Ok(Arc::new(SquareLoss)));
    r.register("absolute", |_| Ok(Arc::new(AbsoluteLoss)));
    r.register("log", |_| Ok(Arc::new(LogLoss)));
    r.register("custom", |sel| {
        let boundary: Vec<[f64; 2]> = sel
            .get("boundary")?
            .ok_or_else(|| invalid("custom game needs a boundary"))?;
        Ok(Arc::new(CustomConvex::new(
            boundary.into_iter().map(|[a, b]| (a, b)).collect(),
        )?))
    });
    r
}

/// `sobolev`, `gaussian` (`width`, default 1), and `linear` (`offset`,
/// default 0, optional `range: [lo, hi]`).
pub fn kernels() -> KernelRegistry {
    let mut r = KernelRegistry::empty("kernel");
    r.register("sobolev", |_| Ok(Arc::new(Sobolev)));
    r.register("gaussian", |sel| {
        Ok(Arc::new(Gaussian::new(sel.f64_or("width", 1.0)?)?))
    });
    r.register("linear", |sel| {
        let range = sel
            .get::<[f64; 2]>("range")?
            .map(|[lo, hi]| DataRange::interval(lo, hi))
            .transpose()?;
        Ok(Arc::new(Linear::new(sel.f64_or("offset", 0.0)?, range)?))
    });
    r
}

/// `iid_logistic`, `deterministic`, `adversarial` and `replay`.
pub fn generators() -> GeneratorRegistry {
    let mut r = GeneratorRegistry::empty("generator");
    r.register("iid_logistic", |sel| {
        let weights = sel.get("weights")?.unwrap_or_else(|| vec![0.0, 3.0]);
        Ok(Arc::new(IidLogistic::new(weights)?))
    });
    r.register("deterministic", |sel| {
        let rule = sel.get::<String>("rule")?.unwrap_or_else(|| "x>0".into());
        Ok(Arc::new(Deterministic::new(
            &rule,
            sel.f64_or("noise_rate", 0.0)?,
        )?))
    });
    r.register("adversarial", |_| Ok(Arc::new(Adversarial)));
    r.register("replay", |sel| {
        Ok(Arc::new(Replay::from_path(sel.str("file")?)?))
    });
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selectors_parse_from_names_and_objects() {
        let s: Selector = serde_json::from_str("\"sobolev\"").unwrap();
        assert_eq!(s, Selector::named("sobolev"));
        let s: Selector = serde_json::from_str(r#"{"name":"gaussian","width":0.5}"#).unwrap();
        assert_eq!(s.name, "gaussian");
        assert_eq!(s.f64_or("width", 1.0).unwrap(), 0.5);
        assert!(serde_json::from_str::<Selector>(r#"{"width":0.5}"#).is_err());
        assert!(serde_json::from_str::<Selector>("3").is_err());
    }

    #[test]
    fn selectors_round_trip() {
        for doc in [
            "\"log\"",
            r#"{"name":"linear","offset":1.0,"range":[-1.0,2.0]}"#,
        ] {
            let s: Selector = serde_json::from_str(doc).unwrap();
            let back: Selector = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
            assert_eq!(s, back);
        }
    }

    #[test]
    fn builtins_are_registered() {
        let g = games();
        for name in ["square", "absolute", "log"] {
            assert_eq!(g.build(&Selector::named(name)).unwrap().name(), name);
        }
        let custom =
            Selector::named("custom").with("boundary", serde_json::json!([[0.0, 1.0], [1.0, 0.0]]));
        assert_eq!(g.build(&custom).unwrap().name(), "custom");
        let k = kernels();
        let gauss = k
            .build(&Selector::named("gaussian").with("width", 2.0))
            .unwrap();
        assert_eq!(gauss.eval(&[0.0], &[2.0]), (-0.5f64).exp());
        let lin = k
            .build(&Selector::named("linear").with("range", serde_json::json!([-2.0, 2.0])))
            .unwrap();
        assert_eq!(lin.c_f(None).finite().unwrap(), 2.0);
        assert!(generators().contains("adversarial"));
    }

    #[test]
    fn unknown_names_are_reported() {
        match games().build(&Selector::named("hinge")) {
            Err(Error::UnknownName { kind, name }) => {
                assert_eq!((kind, name.as_str()), ("game", "hinge"))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn registration_replaces_and_extends() {
        let mut g = games();
        g.register("brier", |_| Ok(Arc::new(SquareLoss)));
        assert_eq!(g.build(&Selector::named("brier")).unwrap().name(), "square");
        assert_eq!(g.names().count(), 5);
    }
}

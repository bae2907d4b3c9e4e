//! Named strategy registries.
//!
//! Each interchangeable algorithm family (decomposers, paragraph scorers,
//! readers, LLM clients) registers factories here under a stable name; run
//! configurations pick an implementation at runtime. Built-in variants are
//! installed by each family's `builtin_*` constructor.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

type Factory<C, T> = Box<dyn Fn(&C) -> Result<Box<T>> + Send + Sync>;

/// Factory table from strategy name to boxed trait object, parameterized
/// over the family's config type `C` and trait object type `T`.
pub struct StrategyRegistry<C, T: ?Sized> {
    family: &'static str,
    factories: BTreeMap<String, Factory<C, T>>,
}

impl<C, T: ?Sized> StrategyRegistry<C, T> {
    pub fn new(family: &'static str) -> Self {
        StrategyRegistry { family, factories: BTreeMap::new() }
    }

    /// Registers a factory under `name`, replacing any previous entry.
    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&C) -> Result<Box<T>> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    /// Instantiates the named strategy.
    pub fn build(&self, name: &str, config: &C) -> Result<Box<T>> {
        match self.factories.get(name) {
            Some(factory) => factory(config),
            None => Err(Error::config(format!(
                "unknown {} strategy `{name}` (available: {})",
                self.family,
                self.names().join(", ")
            ))),
        }
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(|s| s.as_str()).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    trait Greeter {
        fn greet(&self) -> String;
    }

    struct Plain;
    impl Greeter for Plain {
        fn greet(&self) -> String {
            "hi".into()
        }
    }

    #[test]
    fn build_by_name_and_report_unknown() {
        let mut reg: StrategyRegistry<(), dyn Greeter> = StrategyRegistry::new("greeter");
        reg.register("plain", |_| Ok(Box::new(Plain)));
        assert_eq!(reg.build("plain", &()).unwrap().greet(), "hi");
        let err = match reg.build("loud", &()) {
            Err(e) => e.to_string(),
            Ok(_) => panic!("unknown strategy should fail"),
        };
        assert!(err.contains("loud") && err.contains("plain"), "{err}");
    }
}

//! Name-keyed factories for interchangeable strategies.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::RegistryError;

type Factory<T, A, E> = Box<dyn Fn(&A) -> Result<Box<T>, E> + Send + Sync>;

/// Maps strategy names to constructors taking a shared argument type `A`.
pub struct Registry<T: ?Sized, A, E> {
    family: &'static str,
    entries: BTreeMap<&'static str, Factory<T, A, E>>,
}

impl<T: ?Sized, A, E: From<RegistryError>> Registry<T, A, E> {
    pub fn new(family: &'static str) -> Self {
        Registry {
            family,
            entries: BTreeMap::new(),
        }
    }

    pub fn register<F>(&mut self, name: &'static str, factory: F) -> &mut Self
    where
        F: Fn(&A) -> Result<Box<T>, E> + Send + Sync + 'static,
    {
        self.entries.insert(name, Box::new(factory));
        self
    }

    pub fn with<F>(mut self, name: &'static str, factory: F) -> Self
    where
        F: Fn(&A) -> Result<Box<T>, E> + Send + Sync + 'static,
    {
        self.register(name, factory);
        self
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn build(&self, name: &str, args: &A) -> Result<Box<T>, E> {
        match self.entries.get(name) {
            Some(f) => f(args),
            None => Err(RegistryError {
                family: self.family,
                name: name.to_string(),
                known: self.names().join(", "),
            }
            .into()),
        }
    }
}

impl<T: ?Sized, A, E> fmt::Debug for Registry<T, A, E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("family", &self.family)
            .field("entries", &self.entries.keys().collect::<Vec<_>>())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    trait Greeter {
        fn greet(&self) -> String;
    }
    struct Hello(String);
    impl Greeter for Hello {
        fn greet(&self) -> String {
            format!("hello {}", self.0)
        }
    }

    #[test]
    fn builds_by_name_and_reports_unknown() {
        let reg: Registry<dyn Greeter, String, RegistryError> = Registry::new("greeter")
            .with("hello", |who: &String| {
                Ok(Box::new(Hello(who.clone())) as Box<dyn Greeter>)
            });
        assert_eq!(reg.build("hello", &"db".to_string()).unwrap().greet(), "hello db");
        let err = reg.build("bye", &String::new()).err().unwrap();
        assert_eq!(err.to_string(), "unknown greeter `bye` (known: hello)");
    }
}

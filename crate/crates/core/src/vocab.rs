//! Interned string table with stable ids in insertion order.

use std::collections::HashMap;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocab {
    items: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build from unique items; panics on duplicates (caller bug).
    pub fn from_items<I, S>(items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocab::new();
        for item in items {
            let item = item.into();
            let prev = v.index.insert(item.clone(), v.items.len() as u32);
            assert!(prev.is_none(), "duplicate vocab item {item:?}");
            v.items.push(item);
        }
        v
    }

    /// Id of `item`, inserting it if new.
    pub fn intern(&mut self, item: &str) -> u32 {
        if let Some(&id) = self.index.get(item) {
            return id;
        }
        let id = self.items.len() as u32;
        self.index.insert(item.to_string(), id);
        self.items.push(item.to_string());
        id
    }

    pub fn id(&self, item: &str) -> Option<u32> {
        self.index.get(item).copied()
    }

    pub fn get(&self, id: u32) -> &str {
        &self.items[id as usize]
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, item: &str) -> bool {
        self.index.contains_key(item)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.items
            .iter()
            .enumerate()
            .map(|(i, s)| (i as u32, s.as_str()))
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }
}

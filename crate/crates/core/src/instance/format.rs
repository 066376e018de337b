use std::path::Path;

use super::{Instance, InstanceData};
use crate::error::{Error, Result};

/// Parses and validates an instance file.
pub fn parse_instance(text: &str) -> Result<Instance> {
    let data: InstanceData = toml::from_str(text).map_err(|e| Error::Syntax(e.to_string()))?;
    Instance::new(data)
}

pub fn serialize_instance(inst: &Instance) -> String {
    toml::to_string(inst.data()).expect("instance data always serializes")
}

impl Instance {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Instance> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
        })?;
        parse_instance(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serialize_instance(self))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::tests::minimal_data;

    #[test]
    fn round_trip() {
        let inst = Instance::new(minimal_data()).unwrap();
        let text = serialize_instance(&inst);
        let back = parse_instance(&text).unwrap();
        assert_eq!(inst, back);
    }

    #[test]
    fn syntax_errors_are_reported() {
        assert!(matches!(parse_instance("[meta"), Err(Error::Syntax(_))));
        assert!(matches!(parse_instance("[meta]\nname = 1"), Err(Error::Syntax(_))));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let inst = Instance::new(minimal_data()).unwrap();
        let text = serialize_instance(&inst).replace("[meta]", "[meta]\ncolour = \"red\"");
        assert!(parse_instance(&text).is_err());
    }
}

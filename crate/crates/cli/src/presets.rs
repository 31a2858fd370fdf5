//! Figure presets shipped with the binary.

/// `(name, contents)` of every preset.
pub const PRESETS: &[(&str, &str)] = &[
    ("fig2", include_str!("../presets/fig2.conf")),
    ("fig3a", include_str!("../presets/fig3a.conf")),
    ("fig3b", include_str!("../presets/fig3b.conf")),
    ("fig3c", include_str!("../presets/fig3c.conf")),
    ("fig4", include_str!("../presets/fig4.conf")),
    ("fig5a", include_str!("../presets/fig5a.conf")),
    ("fig5b", include_str!("../presets/fig5b.conf")),
    ("fig5c", include_str!("../presets/fig5c.conf")),
    ("fig5d", include_str!("../presets/fig5d.conf")),
    ("fig5e", include_str!("../presets/fig5e.conf")),
    ("fig5f", include_str!("../presets/fig5f.conf")),
    ("fig6a", include_str!("../presets/fig6a.conf")),
    ("fig6b", include_str!("../presets/fig6b.conf")),
    ("fig7", include_str!("../presets/fig7.conf")),
    ("fig8a", include_str!("../presets/fig8a.conf")),
    ("fig8b", include_str!("../presets/fig8b.conf")),
    ("fig8c", include_str!("../presets/fig8c.conf")),
    ("fig8d", include_str!("../presets/fig8d.conf")),
    ("fig8e", include_str!("../presets/fig8e.conf")),
    ("fig8f", include_str!("../presets/fig8f.conf")),
];

pub fn lookup(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

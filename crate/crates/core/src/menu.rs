//! HUD menu hierarchy and the in-vehicle device model.
//!
//! The top menu shows device ON switches on the right and OFF switches on the
//! left; selecting an ON switch powers the device and opens its submenu. Each
//! switch carries pips telling the driver how many fingers of which hand
//! select it (red for left, blue for right).
//!
//! Gesture input ([`apply_gesture`]) and the physical console of the baseline
//! interface ([`apply_tactile`]) share one device model, so both interfaces
//! produce identical device states for equivalent operations.
//!
//! [`plan_gestures`] finds the shortest gesture sequence reaching a
//! [`TaskGoal`], breadth-first over the transition graph.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gesture_input::Hand;
use crate::recognizer::Gesture;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Device {
    Radio,
    Mp3,
    Ac,
    Heater,
}

impl Device {
    pub const ALL: [Device; 4] = [Device::Radio, Device::Mp3, Device::Ac, Device::Heater];

    pub const fn name(self) -> &'static str {
        match self {
            Device::Radio => "radio",
            Device::Mp3 => "mp3",
            Device::Ac => "ac",
            Device::Heater => "heater",
        }
    }

    pub const fn is_audio(self) -> bool {
        matches!(self, Device::Radio | Device::Mp3)
    }

    pub const fn focus(self) -> MenuFocus {
        match self {
            Device::Radio => MenuFocus::Radio,
            Device::Mp3 => MenuFocus::Mp3,
            Device::Ac => MenuFocus::Ac,
            Device::Heater => MenuFocus::Heater,
        }
    }
}

impl fmt::Display for Device {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Device {
    type Err = MenuError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Device::ALL.into_iter().find(|d| d.name() == s).ok_or_else(|| MenuError::UnknownName(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MenuFocus {
    InterfaceOff,
    Top,
    Radio,
    Mp3,
    Ac,
    Heater,
}

impl MenuFocus {
    pub const ALL: [MenuFocus; 6] =
        [MenuFocus::InterfaceOff, MenuFocus::Top, MenuFocus::Radio, MenuFocus::Mp3, MenuFocus::Ac, MenuFocus::Heater];

    pub const fn name(self) -> &'static str {
        match self {
            MenuFocus::InterfaceOff => "interface_off",
            MenuFocus::Top => "top",
            MenuFocus::Radio => "radio",
            MenuFocus::Mp3 => "mp3",
            MenuFocus::Ac => "ac",
            MenuFocus::Heater => "heater",
        }
    }

    /// The device whose submenu this is.
    pub const fn device(self) -> Option<Device> {
        match self {
            MenuFocus::Radio => Some(Device::Radio),
            MenuFocus::Mp3 => Some(Device::Mp3),
            MenuFocus::Ac => Some(Device::Ac),
            MenuFocus::Heater => Some(Device::Heater),
            MenuFocus::InterfaceOff | MenuFocus::Top => None,
        }
    }
}

impl fmt::Display for MenuFocus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MenuFocus {
    type Err = MenuError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MenuFocus::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| MenuError::UnknownName(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outlet {
    Top,
    Bilevel,
    Bottom,
    Defrost,
}

impl Outlet {
    pub const ALL: [Outlet; 4] = [Outlet::Top, Outlet::Bilevel, Outlet::Bottom, Outlet::Defrost];

    pub const fn name(self) -> &'static str {
        match self {
            Outlet::Top => "top",
            Outlet::Bilevel => "bilevel",
            Outlet::Bottom => "bottom",
            Outlet::Defrost => "defrost",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mp3Mode {
    Random,
    Mute,
    Intro,
}

impl Mp3Mode {
    pub const ALL: [Mp3Mode; 3] = [Mp3Mode::Random, Mp3Mode::Mute, Mp3Mode::Intro];

    pub const fn name(self) -> &'static str {
        match self {
            Mp3Mode::Random => "random",
            Mp3Mode::Mute => "mute",
            Mp3Mode::Intro => "intro",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MenuError {
    #[error("{0} is off")]
    DeviceOff(Device),
    #[error("{action} does not apply to {device}")]
    InvalidTarget { action: &'static str, device: Device },
    #[error("preset {0} outside 1..=3")]
    InvalidPreset(u8),
    #[error("device limits invalid: {0}")]
    InvalidLimits(String),
    #[error("unknown name `{0}`")]
    UnknownName(String),
}

/// Bounds of the device model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DeviceLimits {
    pub stations: u8,
    pub max_volume: u8,
    pub max_fan: u8,
}

impl Default for DeviceLimits {
    fn default() -> Self {
        Self { stations: 10, max_volume: 30, max_fan: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RadioState {
    pub power: bool,
    pub station: u8,
    pub presets: [u8; 3],
    pub volume: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Mp3State {
    pub power: bool,
    pub volume: u8,
    pub random: bool,
    pub mute: bool,
    pub intro: bool,
}

impl Mp3State {
    pub fn mode(&self, mode: Mp3Mode) -> bool {
        match mode {
            Mp3Mode::Random => self.random,
            Mp3Mode::Mute => self.mute,
            Mp3Mode::Intro => self.intro,
        }
    }

    fn mode_mut(&mut self, mode: Mp3Mode) -> &mut bool {
        match mode {
            Mp3Mode::Random => &mut self.random,
            Mp3Mode::Mute => &mut self.mute,
            Mp3Mode::Intro => &mut self.intro,
        }
    }
}

/// A/C or heater.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClimateState {
    pub power: bool,
    pub fan: u8,
    pub outlet: Outlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DeviceState {
    pub radio: RadioState,
    pub mp3: Mp3State,
    pub ac: ClimateState,
    pub heater: ClimateState,
    pub limits: DeviceLimits,
}

impl Default for DeviceState {
    fn default() -> Self {
        Self::new(DeviceLimits::default(), [3, 6, 9]).expect("default limits are valid")
    }
}

/// Internal device operation shared by the gesture and tactile paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DeviceOp {
    PowerOn(Device),
    PowerOff(Device),
    PowerToggle(Device),
    Volume(Device, i8),
    Fan(Device, i8),
    Preset(u8),
    Channel(i8),
    Outlet(Device, Outlet),
    ModeToggle(Mp3Mode),
}

fn step_saturating(value: u8, delta: i8, min: u8, max: u8) -> u8 {
    (value as i16 + delta as i16).clamp(min as i16, max as i16) as u8
}

impl DeviceState {
    /// All devices off, volumes at a third of the range, fans at 2, outlets
    /// bilevel, radio tuned to station 1.
    pub fn new(limits: DeviceLimits, presets: [u8; 3]) -> Result<Self, MenuError> {
        if limits.stations == 0 || limits.max_volume == 0 || limits.max_fan < 2 {
            return Err(MenuError::InvalidLimits(format!("{limits:?}")));
        }
        if let Some(p) = presets.iter().find(|&&p| p == 0 || p > limits.stations) {
            return Err(MenuError::InvalidLimits(format!("preset station {p} outside 1..={}", limits.stations)));
        }
        let volume = limits.max_volume / 3;
        let climate = ClimateState { power: false, fan: 2.min(limits.max_fan), outlet: Outlet::Bilevel };
        Ok(Self {
            radio: RadioState { power: false, station: 1, presets, volume },
            mp3: Mp3State { power: false, volume, random: false, mute: false, intro: false },
            ac: climate,
            heater: climate,
            limits,
        })
    }

    pub fn power(&self, device: Device) -> bool {
        match device {
            Device::Radio => self.radio.power,
            Device::Mp3 => self.mp3.power,
            Device::Ac => self.ac.power,
            Device::Heater => self.heater.power,
        }
    }

    fn power_mut(&mut self, device: Device) -> &mut bool {
        match device {
            Device::Radio => &mut self.radio.power,
            Device::Mp3 => &mut self.mp3.power,
            Device::Ac => &mut self.ac.power,
            Device::Heater => &mut self.heater.power,
        }
    }

    pub fn volume(&self, device: Device) -> Option<u8> {
        match device {
            Device::Radio => Some(self.radio.volume),
            Device::Mp3 => Some(self.mp3.volume),
            _ => None,
        }
    }

    pub fn climate(&self, device: Device) -> Option<&ClimateState> {
        match device {
            Device::Ac => Some(&self.ac),
            Device::Heater => Some(&self.heater),
            _ => None,
        }
    }

    fn climate_mut(&mut self, device: Device, action: &'static str) -> Result<&mut ClimateState, MenuError> {
        match device {
            Device::Ac => Ok(&mut self.ac),
            Device::Heater => Ok(&mut self.heater),
            _ => Err(MenuError::InvalidTarget { action, device }),
        }
    }

    fn apply(&mut self, op: DeviceOp) -> Result<(), MenuError> {
        let limits = self.limits;
        match op {
            DeviceOp::PowerOn(d) => *self.power_mut(d) = true,
            DeviceOp::PowerOff(d) => *self.power_mut(d) = false,
            DeviceOp::PowerToggle(d) => {
                let p = self.power_mut(d);
                *p = !*p;
            }
            DeviceOp::Volume(d, delta) => {
                let v = match d {
                    Device::Radio => &mut self.radio.volume,
                    Device::Mp3 => &mut self.mp3.volume,
                    _ => return Err(MenuError::InvalidTarget { action: "volume", device: d }),
                };
                *v = step_saturating(*v, delta, 0, limits.max_volume);
            }
            DeviceOp::Fan(d, delta) => {
                let c = self.climate_mut(d, "fan")?;
                c.fan = step_saturating(c.fan, delta, 1, limits.max_fan);
            }
            DeviceOp::Preset(i) => {
                if !(1..=3).contains(&i) {
                    return Err(MenuError::InvalidPreset(i));
                }
                self.radio.station = self.radio.presets[i as usize - 1];
            }
            DeviceOp::Channel(delta) => {
                let s = limits.stations as i16;
                let zero_based = (self.radio.station as i16 - 1 + delta as i16).rem_euclid(s);
                self.radio.station = (zero_based + 1) as u8;
            }
            DeviceOp::Outlet(d, outlet) => self.climate_mut(d, "outlet")?.outlet = outlet,
            DeviceOp::ModeToggle(m) => {
                let flag = self.mp3.mode_mut(m);
                *flag = !*flag;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Snapshot {
    pub menu: MenuFocus,
    pub devices: DeviceState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SystemState {
    pub menu: MenuFocus,
    pub devices: DeviceState,
    /// One level of undo for `Cancel`; never chains.
    pub undo: Option<Snapshot>,
}

impl Default for SystemState {
    /// Interface on at the top menu, all devices off.
    fn default() -> Self {
        Self::new(DeviceState::default())
    }
}

impl SystemState {
    pub fn new(devices: DeviceState) -> Self {
        Self { menu: MenuFocus::Top, devices, undo: None }
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot { menu: self.menu, devices: self.devices }
    }

    /// Same menu and devices, ignoring the undo slot.
    pub fn same_view(&self, other: &SystemState) -> bool {
        self.menu == other.menu && self.devices == other.devices
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "device", rename_all = "snake_case")]
pub enum FeedbackEvent {
    /// The device name is spoken.
    Verbal(Device),
    /// Short electronic tone.
    Tone,
    /// The audio device itself is heard.
    DeviceSound(Device),
}

/// What a menu switch does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ActionId {
    DeviceOn(Device),
    DeviceOff(Device),
    Preset(u8),
    ChannelUp,
    ChannelDown,
    VolumeUp,
    VolumeDown,
    FanUp,
    FanDown,
    ModeToggle(Mp3Mode),
    OutletSelect(Outlet),
    /// Return to the top menu.
    Back,
    /// Close the submenu; the device keeps running.
    MenuOff,
}

impl ActionId {
    /// Every action name accepted in layout documents.
    pub fn all() -> Vec<ActionId> {
        let mut all = Vec::new();
        for d in Device::ALL {
            all.push(ActionId::DeviceOn(d));
            all.push(ActionId::DeviceOff(d));
        }
        all.extend((1..=3).map(ActionId::Preset));
        all.extend([
            ActionId::ChannelUp,
            ActionId::ChannelDown,
            ActionId::VolumeUp,
            ActionId::VolumeDown,
            ActionId::FanUp,
            ActionId::FanDown,
        ]);
        all.extend(Mp3Mode::ALL.map(ActionId::ModeToggle));
        all.extend(Outlet::ALL.map(ActionId::OutletSelect));
        all.extend([ActionId::Back, ActionId::MenuOff]);
        all
    }

    pub fn name(&self) -> String {
        match self {
            ActionId::DeviceOn(d) => format!("{d}-on"),
            ActionId::DeviceOff(d) => format!("{d}-off"),
            ActionId::Preset(i) => format!("preset-{i}"),
            ActionId::ChannelUp => "channel-up".into(),
            ActionId::ChannelDown => "channel-down".into(),
            ActionId::VolumeUp => "volume-up".into(),
            ActionId::VolumeDown => "volume-down".into(),
            ActionId::FanUp => "fan-up".into(),
            ActionId::FanDown => "fan-down".into(),
            ActionId::ModeToggle(m) => m.name().into(),
            ActionId::OutletSelect(o) => format!("outlet-{}", o.name()),
            ActionId::Back => "back".into(),
            ActionId::MenuOff => "menu-off".into(),
        }
    }

    /// Short caption for the HUD icon.
    pub fn label(&self) -> String {
        match self {
            ActionId::DeviceOn(d) => format!("{} ON", d.name().to_uppercase()),
            ActionId::DeviceOff(d) => format!("{} OFF", d.name().to_uppercase()),
            ActionId::Preset(i) => format!("CH{i}"),
            ActionId::ChannelUp => "CH +".into(),
            ActionId::ChannelDown => "CH -".into(),
            ActionId::VolumeUp => "VOL +".into(),
            ActionId::VolumeDown => "VOL -".into(),
            ActionId::FanUp => "FAN +".into(),
            ActionId::FanDown => "FAN -".into(),
            ActionId::ModeToggle(m) => m.name().to_uppercase(),
            ActionId::OutletSelect(o) => o.name().to_uppercase(),
            ActionId::Back => "BACK".into(),
            ActionId::MenuOff => "OFF".into(),
        }
    }

    /// Whether the action may appear in the given menu.
    pub fn fits(&self, focus: MenuFocus) -> bool {
        use MenuFocus as F;
        match self {
            ActionId::DeviceOn(_) | ActionId::DeviceOff(_) => focus == F::Top,
            ActionId::Preset(_) | ActionId::ChannelUp | ActionId::ChannelDown => focus == F::Radio,
            ActionId::VolumeUp | ActionId::VolumeDown => matches!(focus, F::Radio | F::Mp3),
            ActionId::ModeToggle(_) => focus == F::Mp3,
            ActionId::FanUp | ActionId::FanDown | ActionId::OutletSelect(_) => {
                matches!(focus, F::Ac | F::Heater)
            }
            ActionId::Back | ActionId::MenuOff => focus.device().is_some(),
        }
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for ActionId {
    type Err = MenuError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActionId::all().into_iter().find(|a| a.name() == s).ok_or_else(|| MenuError::UnknownName(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PipColor {
    Red,
    Blue,
}

impl PipColor {
    pub const fn for_hand(hand: Hand) -> Self {
        match hand {
            Hand::Left => PipColor::Red,
            Hand::Right => PipColor::Blue,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutEntryDoc {
    pub focus: MenuFocus,
    pub hand: Hand,
    pub count: u8,
    pub action: String,
    /// Export-only rendering hints; ignored when loading.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pip_color: Option<PipColor>,
}

pub const LAYOUT_DOC_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutDocument {
    pub version: u32,
    pub entries: Vec<LayoutEntryDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LayoutError {
    #[error("unsupported layout version {0}")]
    Version(u32),
    #[error("layout has no entries")]
    Empty,
    #[error("entry {row}: unknown action `{action}`")]
    UnknownAction { row: usize, action: String },
    #[error("entry {row}: finger count {count} outside 1..=5")]
    BadCount { row: usize, count: u8 },
    #[error("entry {row}: menu {focus} cannot hold switches")]
    BadFocus { row: usize, focus: MenuFocus },
    #[error("entry {row}: right-hand 5 is the cancel hotkey and cannot select `{action}`")]
    ShadowedByCancel { row: usize, action: String },
    #[error("entry {row}: action `{action}` does not belong in the {focus} menu")]
    MisplacedAction { row: usize, focus: MenuFocus, action: String },
    #[error("entry {row}: duplicate key ({focus}, {hand}, {count}); first defined by entry {first}", hand = .hand.name())]
    Duplicate { row: usize, first: usize, focus: MenuFocus, hand: Hand, count: u8 },
    #[error("entry {row}: action `{action}` in the {focus} menu is unreachable from the top menu")]
    Unreachable { row: usize, focus: MenuFocus, action: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct LayoutEntry {
    pub focus: MenuFocus,
    pub hand: Hand,
    pub count: u8,
    #[serde(serialize_with = "serialize_action")]
    pub action: ActionId,
}

fn serialize_action<S: serde::Serializer>(a: &ActionId, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&a.name())
}

impl LayoutEntry {
    pub fn pip_color(&self) -> PipColor {
        PipColor::for_hand(self.hand)
    }
}

/// Validated mapping from (menu, hand, finger count) to a switch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MenuLayout {
    entries: BTreeMap<(MenuFocus, Hand, u8), ActionId>,
}

impl Default for MenuLayout {
    fn default() -> Self {
        load_layout(&default_layout_document()).expect("built-in layout is valid")
    }
}

impl MenuLayout {
    pub fn action(&self, focus: MenuFocus, hand: Hand, count: u8) -> Option<ActionId> {
        self.entries.get(&(focus, hand, count)).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = LayoutEntry> + '_ {
        self.entries.iter().map(|(&(focus, hand, count), &action)| LayoutEntry { focus, hand, count, action })
    }

    /// Switches shown in one menu, in (hand, count) order.
    pub fn menu(&self, focus: MenuFocus) -> Vec<LayoutEntry> {
        self.entries().filter(|e| e.focus == focus).collect()
    }

    pub fn to_document(&self) -> LayoutDocument {
        LayoutDocument {
            version: LAYOUT_DOC_VERSION,
            entries: self
                .entries()
                .map(|e| LayoutEntryDoc {
                    focus: e.focus,
                    hand: e.hand,
                    count: e.count,
                    action: e.action.name(),
                    label: Some(e.action.label()),
                    pip_color: Some(e.pip_color()),
                })
                .collect(),
        }
    }
}

/// The built-in layout: top menu ON right / OFF left; audio submenus presets
/// or modes on the left, volume down/up, back and menu-off on the right;
/// climate submenus outlets on the left, fan down/up, back and off on the right.
pub fn default_layout_document() -> LayoutDocument {
    use ActionId as A;
    use Hand::{Left, Right};
    use MenuFocus as F;
    let mut rows: Vec<(MenuFocus, Hand, u8, ActionId)> = Vec::new();
    for (i, d) in Device::ALL.into_iter().enumerate() {
        rows.push((F::Top, Right, i as u8 + 1, A::DeviceOn(d)));
        rows.push((F::Top, Left, i as u8 + 1, A::DeviceOff(d)));
    }
    let audio_right = [A::VolumeDown, A::VolumeUp, A::Back, A::MenuOff];
    let climate_right = [A::FanDown, A::FanUp, A::Back, A::MenuOff];
    let radio_left = [A::Preset(1), A::Preset(2), A::Preset(3), A::ChannelUp, A::ChannelDown];
    let mp3_left = Mp3Mode::ALL.map(A::ModeToggle);
    let climate_left = Outlet::ALL.map(A::OutletSelect);
    let mut add = |focus, left: &[ActionId], right: &[ActionId]| {
        for (i, &a) in left.iter().enumerate() {
            rows.push((focus, Left, i as u8 + 1, a));
        }
        for (i, &a) in right.iter().enumerate() {
            rows.push((focus, Right, i as u8 + 1, a));
        }
    };
    add(F::Radio, &radio_left, &audio_right);
    add(F::Mp3, &mp3_left, &audio_right);
    add(F::Ac, &climate_left, &climate_right);
    add(F::Heater, &climate_left, &climate_right);
    LayoutDocument {
        version: LAYOUT_DOC_VERSION,
        entries: rows
            .into_iter()
            .map(|(focus, hand, count, a)| LayoutEntryDoc {
                focus,
                hand,
                count,
                action: a.name(),
                label: None,
                pip_color: None,
            })
            .collect(),
    }
}

/// Validates a layout document.
pub fn load_layout(doc: &LayoutDocument) -> Result<MenuLayout, LayoutError> {
    if doc.version != LAYOUT_DOC_VERSION {
        return Err(LayoutError::Version(doc.version));
    }
    if doc.entries.is_empty() {
        return Err(LayoutError::Empty);
    }
    let mut entries = BTreeMap::new();
    let mut rows: BTreeMap<(MenuFocus, Hand, u8), usize> = BTreeMap::new();
    for (row, e) in doc.entries.iter().enumerate() {
        let row = row + 1;
        let action: ActionId =
            e.action.parse().map_err(|_| LayoutError::UnknownAction { row, action: e.action.clone() })?;
        if !(1..=5).contains(&e.count) {
            return Err(LayoutError::BadCount { row, count: e.count });
        }
        if e.focus == MenuFocus::InterfaceOff {
            return Err(LayoutError::BadFocus { row, focus: e.focus });
        }
        if e.hand == Hand::Right && e.count == 5 {
            return Err(LayoutError::ShadowedByCancel { row, action: e.action.clone() });
        }
        if !action.fits(e.focus) {
            return Err(LayoutError::MisplacedAction { row, focus: e.focus, action: e.action.clone() });
        }
        let key = (e.focus, e.hand, e.count);
        if let Some(&first) = rows.get(&key) {
            return Err(LayoutError::Duplicate { row, first, focus: e.focus, hand: e.hand, count: e.count });
        }
        rows.insert(key, row);
        entries.insert(key, action);
    }
    let reachable: BTreeSet<MenuFocus> = core::iter::once(MenuFocus::Top)
        .chain(entries.iter().filter_map(|(&(focus, _, _), a)| match (focus, a) {
            (MenuFocus::Top, ActionId::DeviceOn(d)) => Some(d.focus()),
            _ => None,
        }))
        .collect();
    for (&key, &row) in &rows {
        if !reachable.contains(&key.0) {
            return Err(LayoutError::Unreachable { row, focus: key.0, action: entries[&key].name() });
        }
    }
    Ok(MenuLayout { entries })
}

fn action_op(action: ActionId, focus: MenuFocus) -> Option<DeviceOp> {
    let device = focus.device();
    Some(match action {
        ActionId::DeviceOn(d) => DeviceOp::PowerOn(d),
        ActionId::DeviceOff(d) => DeviceOp::PowerOff(d),
        ActionId::Preset(i) => DeviceOp::Preset(i),
        ActionId::ChannelUp => DeviceOp::Channel(1),
        ActionId::ChannelDown => DeviceOp::Channel(-1),
        ActionId::VolumeUp => DeviceOp::Volume(device?, 1),
        ActionId::VolumeDown => DeviceOp::Volume(device?, -1),
        ActionId::FanUp => DeviceOp::Fan(device?, 1),
        ActionId::FanDown => DeviceOp::Fan(device?, -1),
        ActionId::ModeToggle(m) => DeviceOp::ModeToggle(m),
        ActionId::OutletSelect(o) => DeviceOp::Outlet(device?, o),
        ActionId::Back | ActionId::MenuOff => return None,
    })
}

fn op_feedback(op: DeviceOp) -> FeedbackEvent {
    match op {
        DeviceOp::Preset(_) | DeviceOp::Channel(_) => FeedbackEvent::DeviceSound(Device::Radio),
        _ => FeedbackEvent::Tone,
    }
}

/// Single transition; at most one feedback event per gesture.
fn transition(state: &SystemState, gesture: Gesture, layout: &MenuLayout) -> (SystemState, Option<FeedbackEvent>) {
    let mut next = *state;
    if state.menu == MenuFocus::InterfaceOff && gesture != Gesture::SystemToggle {
        return (next, None);
    }
    let feedback = match gesture {
        Gesture::SystemToggle => {
            next.menu = if state.menu == MenuFocus::InterfaceOff { MenuFocus::Top } else { MenuFocus::InterfaceOff };
            FeedbackEvent::Tone
        }
        Gesture::TopMenu => {
            next.menu = MenuFocus::Top;
            FeedbackEvent::Tone
        }
        Gesture::Cancel => {
            if let Some(prev) = state.undo {
                next = SystemState { menu: prev.menu, devices: prev.devices, undo: None };
            }
            return (next, Some(FeedbackEvent::Tone));
        }
        Gesture::HandCount { hand, count } => match layout.action(state.menu, hand, count) {
            None => FeedbackEvent::Tone,
            Some(ActionId::Back | ActionId::MenuOff) => {
                next.menu = MenuFocus::Top;
                FeedbackEvent::Tone
            }
            Some(action) => match action_op(action, state.menu) {
                Some(op) if next.devices.apply(op).is_ok() => match action {
                    ActionId::DeviceOn(d) => {
                        next.menu = d.focus();
                        FeedbackEvent::Verbal(d)
                    }
                    ActionId::DeviceOff(d) => FeedbackEvent::Verbal(d),
                    _ => op_feedback(op),
                },
                _ => {
                    next = *state;
                    FeedbackEvent::Tone
                }
            },
        },
    };
    if !next.same_view(state) {
        next.undo = Some(state.snapshot());
    }
    (next, Some(feedback))
}

/// Applies one recognized gesture.
///
/// State-changing gestures store the prior menu and devices for a single
/// level of `Cancel`. Unmapped counts leave the state unchanged and sound a
/// tone. While the interface is off only `SystemToggle` has any effect.
pub fn apply_gesture(state: &SystemState, gesture: Gesture, layout: &MenuLayout) -> (SystemState, Vec<FeedbackEvent>) {
    let (next, feedback) = transition(state, gesture, layout);
    (next, feedback.into_iter().collect())
}

/// Baseline console controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum TactileAction {
    PowerToggle { device: Device },
    VolumeStep { device: Device, delta: i8 },
    FanStep { device: Device, delta: i8 },
    Preset { index: u8 },
    ChannelStep { delta: i8 },
    OutletSelect { device: Device, outlet: Outlet },
    ModeToggle { mode: Mp3Mode },
}

impl TactileAction {
    pub fn device(&self) -> Device {
        match *self {
            TactileAction::PowerToggle { device }
            | TactileAction::VolumeStep { device, .. }
            | TactileAction::FanStep { device, .. }
            | TactileAction::OutletSelect { device, .. } => device,
            TactileAction::Preset { .. } | TactileAction::ChannelStep { .. } => Device::Radio,
            TactileAction::ModeToggle { .. } => Device::Mp3,
        }
    }

    fn op(&self) -> DeviceOp {
        match *self {
            TactileAction::PowerToggle { device } => DeviceOp::PowerToggle(device),
            TactileAction::VolumeStep { device, delta } => DeviceOp::Volume(device, delta),
            TactileAction::FanStep { device, delta } => DeviceOp::Fan(device, delta),
            TactileAction::Preset { index } => DeviceOp::Preset(index),
            TactileAction::ChannelStep { delta } => DeviceOp::Channel(delta),
            TactileAction::OutletSelect { device, outlet } => DeviceOp::Outlet(device, outlet),
            TactileAction::ModeToggle { mode } => DeviceOp::ModeToggle(mode),
        }
    }
}

/// Applies a console press. The menu is untouched; any pending gesture undo
/// is discarded when devices change.
pub fn apply_tactile(
    state: &SystemState,
    action: TactileAction,
) -> Result<(SystemState, Vec<FeedbackEvent>), MenuError> {
    let device = action.device();
    if !matches!(action, TactileAction::PowerToggle { .. }) && !state.devices.power(device) {
        return Err(MenuError::DeviceOff(device));
    }
    let op = action.op();
    let mut next = *state;
    next.devices.apply(op)?;
    if next.devices != state.devices {
        next.undo = None;
    }
    let feedback = if device.is_audio() && !matches!(op, DeviceOp::PowerToggle(_)) {
        FeedbackEvent::DeviceSound(device)
    } else {
        FeedbackEvent::Tone
    };
    Ok((next, vec![feedback]))
}

/// One predicate of a task goal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "clause", rename_all = "snake_case")]
pub enum GoalClause {
    Power { device: Device, on: bool },
    Focus { focus: MenuFocus },
    Volume { device: Device, level: u8 },
    Fan { device: Device, level: u8 },
    Station { station: u8 },
    Outlet { device: Device, outlet: Outlet },
    Mode { mode: Mp3Mode, on: bool },
}

impl GoalClause {
    pub fn holds(&self, s: &SystemState) -> bool {
        let d = &s.devices;
        match *self {
            GoalClause::Power { device, on } => d.power(device) == on,
            GoalClause::Focus { focus } => s.menu == focus,
            GoalClause::Volume { device, level } => d.volume(device) == Some(level),
            GoalClause::Fan { device, level } => d.climate(device).is_some_and(|c| c.fan == level),
            GoalClause::Station { station } => d.radio.station == station,
            GoalClause::Outlet { device, outlet } => d.climate(device).is_some_and(|c| c.outlet == outlet),
            GoalClause::Mode { mode, on } => d.mp3.mode(mode) == on,
        }
    }

    fn feasible(&self, limits: &DeviceLimits) -> bool {
        match *self {
            GoalClause::Volume { device, level } => device.is_audio() && level <= limits.max_volume,
            GoalClause::Fan { device, level } => !device.is_audio() && (1..=limits.max_fan).contains(&level),
            GoalClause::Station { station } => (1..=limits.stations).contains(&station),
            GoalClause::Outlet { device, .. } => !device.is_audio(),
            _ => true,
        }
    }
}

impl fmt::Display for GoalClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GoalClause::Power { device, on } => write!(f, "{device} {}", if on { "on" } else { "off" }),
            GoalClause::Focus { focus } => write!(f, "menu {focus}"),
            GoalClause::Volume { device, level } => write!(f, "{device} volume {level}"),
            GoalClause::Fan { device, level } => write!(f, "{device} fan {level}"),
            GoalClause::Station { station } => write!(f, "radio station {station}"),
            GoalClause::Outlet { device, outlet } => write!(f, "{device} outlet {}", outlet.name()),
            GoalClause::Mode { mode, on } => write!(f, "mp3 {} {}", mode.name(), if on { "on" } else { "off" }),
        }
    }
}

/// Conjunction of clauses over menu and device state.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskGoal {
    pub clauses: Vec<GoalClause>,
}

impl TaskGoal {
    pub fn new(clauses: Vec<GoalClause>) -> Self {
        Self { clauses }
    }

    pub fn is_satisfied(&self, state: &SystemState) -> bool {
        self.clauses.iter().all(|c| c.holds(state))
    }
}

impl fmt::Display for TaskGoal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.clauses.is_empty() {
            return f.write_str("(nothing)");
        }
        for (i, c) in self.clauses.iter().enumerate() {
            if i > 0 {
                f.write_str(" and ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("goal `{0}` is unreachable")]
    Unreachable(String),
}

/// Gestures the planner may use, in tie-break order: lower counts first,
/// right hand before left, hotkeys last.
pub fn planner_alphabet() -> Vec<Gesture> {
    let mut alphabet = Vec::new();
    for count in 1..=5 {
        if count < 5 {
            alphabet.push(Gesture::right(count));
        }
        alphabet.push(Gesture::left(count));
    }
    alphabet.extend([Gesture::TopMenu, Gesture::Cancel, Gesture::SystemToggle]);
    alphabet
}

const MAX_PLAN_DEPTH: usize = 40;
const MAX_PLAN_STATES: usize = 400_000;

/// Minimum-length gesture sequence whose replay satisfies `goal`.
///
/// Among shortest sequences the lexicographically first under
/// [`planner_alphabet`] order is returned.
pub fn plan_gestures(state: &SystemState, goal: &TaskGoal, layout: &MenuLayout) -> Result<Vec<Gesture>, PlanError> {
    if goal.is_satisfied(state) {
        return Ok(Vec::new());
    }
    let unreachable = || PlanError::Unreachable(goal.to_string());
    if goal.clauses.iter().any(|c| !c.feasible(&state.devices.limits)) {
        return Err(unreachable());
    }
    let alphabet = planner_alphabet();
    // (state, parent index, gesture, depth)
    let mut nodes: Vec<(SystemState, usize, Gesture, usize)> = vec![(*state, usize::MAX, Gesture::TopMenu, 0)];
    let mut seen: BTreeSet<SystemState> = BTreeSet::new();
    seen.insert(*state);
    let mut queue = VecDeque::from([0usize]);
    while let Some(idx) = queue.pop_front() {
        let (current, _, _, depth) = nodes[idx];
        if depth >= MAX_PLAN_DEPTH {
            break;
        }
        for &g in &alphabet {
            let (next, _) = transition(&current, g, layout);
            if !seen.insert(next) {
                continue;
            }
            nodes.push((next, idx, g, depth + 1));
            let child = nodes.len() - 1;
            if goal.is_satisfied(&next) {
                let mut path = Vec::with_capacity(depth + 1);
                let mut at = child;
                while at != 0 {
                    path.push(nodes[at].2);
                    at = nodes[at].1;
                }
                path.reverse();
                return Ok(path);
            }
            if nodes.len() >= MAX_PLAN_STATES {
                return Err(unreachable());
            }
            queue.push_back(child);
        }
    }
    Err(unreachable())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fresh() -> SystemState {
        SystemState::default()
    }

    fn go(s: &SystemState, g: Gesture) -> (SystemState, Vec<FeedbackEvent>) {
        apply_gesture(s, g, &MenuLayout::default())
    }

    #[test]
    fn radio_walkthrough() {
        let (s, fb) = go(&fresh(), Gesture::right(1));
        assert_eq!(s.menu, MenuFocus::Radio);
        assert!(s.devices.radio.power);
        assert_eq!(fb, [FeedbackEvent::Verbal(Device::Radio)]);
        assert_eq!(Device::Radio.name(), "radio");

        let v0 = s.devices.radio.volume;
        let (s, fb) = go(&s, Gesture::right(2));
        assert_eq!(s.devices.radio.volume, v0 + 1);
        assert_eq!(fb, [FeedbackEvent::Tone]);

        let (s, _) = go(&s, Gesture::right(4));
        assert_eq!(s.menu, MenuFocus::Top);
        assert!(s.devices.radio.power, "menu-off keeps the radio playing");
    }

    #[test]
    fn volume_saturates() {
        let mut s = go(&fresh(), Gesture::right(1)).0;
        s.devices.radio.volume = s.devices.limits.max_volume;
        let (t, fb) = go(&s, Gesture::right(2));
        assert_eq!(t.devices.radio.volume, s.devices.limits.max_volume);
        assert_eq!(fb, [FeedbackEvent::Tone]);
        s.devices.radio.volume = 0;
        assert_eq!(go(&s, Gesture::right(1)).0.devices.radio.volume, 0);
    }

    #[test]
    fn mp3_mode_toggles() {
        let s = go(&fresh(), Gesture::right(2)).0;
        assert_eq!(s.menu, MenuFocus::Mp3);
        let s = go(&s, Gesture::left(2)).0;
        assert!(s.devices.mp3.mute);
        let s = go(&s, Gesture::left(2)).0;
        assert!(!s.devices.mp3.mute);
    }

    #[test]
    fn top_menu_switches() {
        let on = go(&fresh(), Gesture::right(3)).0;
        assert!(on.devices.ac.power);
        assert_eq!(on.menu, MenuFocus::Ac);
        let top = go(&on, Gesture::TopMenu).0;
        assert_eq!(top.menu, MenuFocus::Top);
        let (off, fb) = go(&top, Gesture::left(3));
        assert!(!off.devices.ac.power);
        assert_eq!(off.menu, MenuFocus::Top);
        assert_eq!(fb, [FeedbackEvent::Verbal(Device::Ac)]);
        // selecting an already-on device enters its submenu without toggling power
        let again = go(&top, Gesture::right(3)).0;
        assert!(again.devices.ac.power);
        assert_eq!(again.menu, MenuFocus::Ac);
    }

    #[test]
    fn unmapped_count_is_tone_only() {
        let (s, fb) = go(&fresh(), Gesture::left(5));
        assert_eq!(s, fresh());
        assert_eq!(fb, [FeedbackEvent::Tone]);
    }

    #[test]
    fn interface_off_absorbs() {
        let off = go(&fresh(), Gesture::SystemToggle).0;
        assert_eq!(off.menu, MenuFocus::InterfaceOff);
        for g in planner_alphabet().into_iter().filter(|&g| g != Gesture::SystemToggle) {
            let (s, fb) = go(&off, g);
            assert_eq!(s, off, "{g:?}");
            assert!(fb.is_empty());
        }
        assert_eq!(go(&off, Gesture::SystemToggle).0.menu, MenuFocus::Top);
    }

    #[test]
    fn cancel_is_single_level() {
        let a = go(&fresh(), Gesture::right(1)).0;
        let b = go(&a, Gesture::right(2)).0;
        let c = go(&b, Gesture::Cancel).0;
        assert!(c.same_view(&a));
        assert!(c.undo.is_none());
        let d = go(&c, Gesture::Cancel).0;
        assert_eq!(d, c, "no chained undo");
        assert_eq!(go(&fresh(), Gesture::Cancel), (fresh(), vec![FeedbackEvent::Tone]));
    }

    #[test]
    fn channel_semantics() {
        let s = go(&fresh(), Gesture::right(1)).0;
        assert_eq!(go(&s, Gesture::left(2)).0.devices.radio.station, s.devices.radio.presets[1]);
        let (up, fb) = go(&s, Gesture::left(4));
        assert_eq!(up.devices.radio.station, 2);
        assert_eq!(fb, [FeedbackEvent::DeviceSound(Device::Radio)]);
        // wraps below station 1
        assert_eq!(go(&s, Gesture::left(5)).0.devices.radio.station, s.devices.limits.stations);
    }

    #[test]
    fn tactile_parity() {
        let s = fresh();
        let (on, _) = apply_tactile(&s, TactileAction::PowerToggle { device: Device::Radio }).unwrap();
        assert!(on.devices.radio.power);
        assert_eq!(on.menu, MenuFocus::Top);
        let (p, _) = apply_tactile(&on, TactileAction::Preset { index: 2 }).unwrap();
        assert_eq!(p.devices.radio.station, p.devices.radio.presets[1]);

        let mut full = on;
        full.devices.radio.volume = full.devices.limits.max_volume;
        let (c, _) = apply_tactile(&full, TactileAction::VolumeStep { device: Device::Radio, delta: 1 }).unwrap();
        assert_eq!(c.devices.radio.volume, full.devices.limits.max_volume);

        assert_eq!(
            apply_tactile(&s, TactileAction::VolumeStep { device: Device::Mp3, delta: 1 }),
            Err(MenuError::DeviceOff(Device::Mp3))
        );
        assert!(matches!(
            apply_tactile(&on, TactileAction::FanStep { device: Device::Radio, delta: 1 }),
            Err(MenuError::InvalidTarget { .. })
        ));

        // gesture and tactile reach the same devices
        let g = go(&go(&fresh(), Gesture::right(1)).0, Gesture::right(2)).0;
        let t = apply_tactile(&on, TactileAction::VolumeStep { device: Device::Radio, delta: 1 }).unwrap().0;
        assert_eq!(g.devices, t.devices);
    }

    #[test]
    fn default_layout_shape() {
        let layout = MenuLayout::default();
        let top = layout.menu(MenuFocus::Top);
        assert_eq!(top.len(), 8);
        for e in &top {
            match e.action {
                ActionId::DeviceOn(_) => assert_eq!(e.hand, Hand::Right),
                ActionId::DeviceOff(_) => assert_eq!(e.hand, Hand::Left),
                _ => panic!("unexpected {e:?}"),
            }
            assert_eq!(e.pip_color(), PipColor::for_hand(e.hand));
        }
        assert_eq!(layout.action(MenuFocus::Radio, Hand::Right, 2), Some(ActionId::VolumeUp));
        assert_eq!(layout.action(MenuFocus::Radio, Hand::Right, 4), Some(ActionId::MenuOff));
        assert_eq!(layout.action(MenuFocus::Heater, Hand::Left, 3), Some(ActionId::OutletSelect(Outlet::Bottom)));
        let doc = layout.to_document();
        assert_eq!(load_layout(&doc).unwrap(), layout);
    }

    #[test]
    fn layout_errors() {
        let mut dup = default_layout_document();
        let mut extra = dup
            .entries
            .iter()
            .find(|e| e.focus == MenuFocus::Radio && e.count == 2 && e.hand == Hand::Right)
            .unwrap()
            .clone();
        extra.action = "menu-off".into();
        dup.entries.push(extra);
        assert!(matches!(load_layout(&dup), Err(LayoutError::Duplicate { count: 2, .. })));

        let mut no_top = default_layout_document();
        no_top.entries.retain(|e| e.focus != MenuFocus::Top);
        let err = load_layout(&no_top).unwrap_err();
        assert!(matches!(err, LayoutError::Unreachable { .. }), "{err}");

        let mut unknown = default_layout_document();
        unknown.entries[0].action = "warp-drive".into();
        let err = load_layout(&unknown).unwrap_err();
        assert_eq!(err, LayoutError::UnknownAction { row: 1, action: "warp-drive".into() });
        assert!(alloc::format!("{err}").contains("warp-drive"));

        let mut shadow = default_layout_document();
        shadow.entries.push(LayoutEntryDoc {
            focus: MenuFocus::Radio,
            hand: Hand::Right,
            count: 5,
            action: "back".into(),
            label: None,
            pip_color: None,
        });
        assert!(matches!(load_layout(&shadow), Err(LayoutError::ShadowedByCancel { .. })));

        let mut misplaced = default_layout_document();
        misplaced.entries[0].action = "fan-up".into();
        assert!(matches!(load_layout(&misplaced), Err(LayoutError::MisplacedAction { .. })));

        assert_eq!(load_layout(&LayoutDocument { version: 1, entries: vec![] }), Err(LayoutError::Empty));
        assert_eq!(load_layout(&LayoutDocument { version: 9, entries: vec![] }), Err(LayoutError::Version(9)));
    }

    #[test]
    fn action_names_round_trip() {
        for a in ActionId::all() {
            assert_eq!(a.name().parse::<ActionId>().unwrap(), a);
        }
    }

    #[test]
    fn planner_examples() {
        let layout = MenuLayout::default();
        let goal = TaskGoal::new(vec![GoalClause::Power { device: Device::Radio, on: true }]);
        assert_eq!(plan_gestures(&fresh(), &goal, &layout).unwrap(), [Gesture::right(1)]);

        let radio = go(&fresh(), Gesture::right(1)).0;
        let target = radio.devices.radio.volume + 2;
        let goal = TaskGoal::new(vec![GoalClause::Volume { device: Device::Radio, level: target }]);
        assert_eq!(plan_gestures(&radio, &goal, &layout).unwrap(), [Gesture::right(2), Gesture::right(2)]);

        assert!(plan_gestures(&radio, &TaskGoal::default(), &layout).unwrap().is_empty());

        let too_loud = TaskGoal::new(vec![GoalClause::Volume { device: Device::Radio, level: 99 }]);
        let err = plan_gestures(&radio, &too_loud, &layout).unwrap_err();
        assert!(alloc::format!("{err}").contains("radio volume 99"));
    }

    #[test]
    fn planner_needs_interface_on() {
        let off = go(&fresh(), Gesture::SystemToggle).0;
        let goal = TaskGoal::new(vec![GoalClause::Power { device: Device::Heater, on: true }]);
        assert_eq!(
            plan_gestures(&off, &goal, &MenuLayout::default()).unwrap(),
            [Gesture::SystemToggle, Gesture::right(4)]
        );
    }
}

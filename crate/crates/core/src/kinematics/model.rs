use super::{Hand, KinematicsError, Transform, TransformSpec};
use crate::scene::collision::{CollisionPrimitive, PrimitiveSpec};
use nalgebra::{Unit, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub enum Joint {
    Fixed,
    Revolute { axis: Unit<Vector3<f64>>, lower: f64, upper: f64 },
}

/// One rigid body. Its frame is `parent_frame ∘ origin ∘ R(axis, q)`.
#[derive(Debug, Clone)]
pub struct Link {
    pub name: String,
    pub parent: Option<usize>,
    pub joint: Joint,
    pub origin: Transform,
    /// kg
    pub mass: f64,
    /// mm, link frame
    pub local_com: Vector3<f64>,
    /// link frame
    pub collision: Vec<CollisionPrimitive>,
    /// index into the joint vector for revolute links
    pub joint_index: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Foot {
    pub link: usize,
    /// Sole contact corners in the foot link frame (mm).
    pub corners: [Vector3<f64>; 4],
}

/// A kinematic tree with masses. Links are stored parents-first.
#[derive(Debug, Clone)]
pub struct RobotModel {
    pub name: String,
    links: Vec<Link>,
    index: HashMap<String, usize>,
    joint_links: Vec<usize>,
    hands: [usize; 2],
    feet: [Foot; 2],
    excluded_pairs: BTreeSet<(usize, usize)>,
    home: Vec<f64>,
    total_mass: f64,
}

impl RobotModel {
    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, i: usize) -> &Link {
        &self.links[i]
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Number of revolute joints.
    pub fn dof(&self) -> usize {
        self.joint_links.len()
    }

    /// Link index owning joint `j`.
    pub fn joint_link(&self, j: usize) -> usize {
        self.joint_links[j]
    }

    pub fn joint_name(&self, j: usize) -> &str {
        &self.links[self.joint_links[j]].name
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.link_index(name).and_then(|i| self.links[i].joint_index)
    }

    pub fn joint_limits(&self, j: usize) -> (f64, f64) {
        match self.links[self.joint_links[j]].joint {
            Joint::Revolute { lower, upper, .. } => (lower, upper),
            Joint::Fixed => unreachable!("joint_links only holds revolute links"),
        }
    }

    pub fn hand_link(&self, hand: Hand) -> usize {
        self.hands[hand.index()]
    }

    pub fn foot(&self, side: Hand) -> &Foot {
        &self.feet[side.index()]
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Home joint vector (used as IK seed and for idle arms).
    pub fn home(&self) -> &[f64] {
        &self.home
    }

    /// Link indices from the root down to `link`, inclusive.
    pub fn chain_to(&self, link: usize) -> Vec<usize> {
        let mut chain = vec![link];
        let mut cur = link;
        while let Some(p) = self.links[cur].parent {
            chain.push(p);
            cur = p;
        }
        chain.reverse();
        chain
    }

    /// Revolute joint indices on the path from the root to `link`.
    pub fn joints_to(&self, link: usize) -> Vec<usize> {
        self.chain_to(link).into_iter().filter_map(|l| self.links[l].joint_index).collect()
    }

    /// Joints moving a hand: the hand chain minus anything shared with a foot chain.
    pub fn arm_joints(&self, hand: Hand) -> Vec<usize> {
        let legs: BTreeSet<usize> =
            [Hand::Left, Hand::Right].iter().flat_map(|&s| self.joints_to(self.foot(s).link)).collect();
        self.joints_to(self.hand_link(hand)).into_iter().filter(|j| !legs.contains(j)).collect()
    }

    /// Joints shared by both hand chains (the waist).
    pub fn waist_joints(&self) -> Vec<usize> {
        let right: BTreeSet<usize> = self.arm_joints(Hand::Right).into_iter().collect();
        self.arm_joints(Hand::Left).into_iter().filter(|j| right.contains(j)).collect()
    }

    /// Joints of one leg (root to foot).
    pub fn leg_joints(&self, side: Hand) -> Vec<usize> {
        self.joints_to(self.foot(side).link)
    }

    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        self.links[a].parent == Some(b) || self.links[b].parent == Some(a)
    }

    /// Pairs never checked for self-collision: parent/child pairs plus the
    /// model file's exclusion list.
    pub fn is_excluded(&self, a: usize, b: usize) -> bool {
        let key = if a < b { (a, b) } else { (b, a) };
        a == b || self.is_adjacent(a, b) || self.excluded_pairs.contains(&key)
    }

    pub fn from_file(path: &Path) -> Result<Self, KinematicsError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| KinematicsError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json_str(&text).map_err(|e| match e {
            KinematicsError::Parse { message, .. } => {
                KinematicsError::Parse { path: path.display().to_string(), message }
            }
            other => other,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self, KinematicsError> {
        let spec: RobotModelSpec = serde_json::from_str(text).map_err(|e| KinematicsError::Parse {
            path: String::new(),
            message: format!("line {} column {}: {}", e.line(), e.column(), e),
        })?;
        Self::from_spec(&spec)
    }

    pub fn from_spec(spec: &RobotModelSpec) -> Result<Self, KinematicsError> {
        let parse_err = |message: String| KinematicsError::Parse { path: String::new(), message };

        // Topological order: parents before children, file order otherwise.
        let mut names: HashMap<&str, usize> = HashMap::new();
        for (i, l) in spec.links.iter().enumerate() {
            if names.insert(l.name.as_str(), i).is_some() {
                return Err(parse_err(format!("links[{i}].name: duplicate link `{}`", l.name)));
            }
        }
        let roots: Vec<usize> =
            spec.links.iter().enumerate().filter(|(_, l)| l.parent.is_none()).map(|(i, _)| i).collect();
        if roots.len() != 1 {
            return Err(parse_err(format!("links: expected exactly one root link, found {}", roots.len())));
        }
        let mut order: Vec<usize> = Vec::with_capacity(spec.links.len());
        let mut placed = vec![false; spec.links.len()];
        while order.len() < spec.links.len() {
            let before = order.len();
            for (i, l) in spec.links.iter().enumerate() {
                if placed[i] {
                    continue;
                }
                let ready = match &l.parent {
                    None => true,
                    Some(p) => {
                        let pi = *names
                            .get(p.as_str())
                            .ok_or_else(|| parse_err(format!("links[{i}].parent: unknown link `{p}`")))?;
                        placed[pi]
                    }
                };
                if ready {
                    placed[i] = true;
                    order.push(i);
                }
            }
            if order.len() == before {
                return Err(parse_err("links: parent references form a cycle".into()));
            }
        }

        let mut links: Vec<Link> = Vec::with_capacity(order.len());
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut joint_links = Vec::new();
        for &src in &order {
            let l = &spec.links[src];
            let field = |f: &str| format!("links[{src}] (`{}`).{f}", l.name);
            let origin = l.origin.to_transform().map_err(|m| parse_err(format!("{}: {m}", field("origin"))))?;
            if !(l.mass.is_finite() && l.mass >= 0.0) {
                return Err(parse_err(format!("{}: must be >= 0, got {}", field("mass"), l.mass)));
            }
            if !l.com.iter().all(|v| v.is_finite()) {
                return Err(parse_err(format!("{}: not finite", field("com"))));
            }
            let joint = match &l.joint {
                JointSpec::Fixed => Joint::Fixed,
                JointSpec::Revolute { axis, limits } => {
                    let a = Vector3::from(*axis);
                    if !a.iter().all(|v| v.is_finite()) || (a.norm() - 1.0).abs() > 1e-9 {
                        return Err(parse_err(format!("{}: axis must be a unit vector", field("joint"))));
                    }
                    if !(limits[0].is_finite() && limits[1].is_finite() && limits[0] <= limits[1]) {
                        return Err(parse_err(format!("{}: limits must satisfy lo <= hi", field("joint"))));
                    }
                    Joint::Revolute { axis: Unit::new_unchecked(a), lower: limits[0], upper: limits[1] }
                }
            };
            let collision = l
                .collision
                .iter()
                .enumerate()
                .map(|(k, p)| p.to_primitive().map_err(|m| parse_err(format!("{}[{k}]: {m}", field("collision")))))
                .collect::<Result<Vec<_>, _>>()?;
            let me = links.len();
            let joint_index = if matches!(joint, Joint::Revolute { .. }) {
                joint_links.push(me);
                Some(joint_links.len() - 1)
            } else {
                None
            };
            links.push(Link {
                name: l.name.clone(),
                parent: l.parent.as_ref().map(|p| index[p.as_str()]),
                joint,
                origin,
                mass: l.mass,
                local_com: Vector3::from(l.com),
                collision,
                joint_index,
            });
            index.insert(l.name.clone(), me);
        }

        let resolve = |name: &str, field: &str| {
            index.get(name).copied().ok_or_else(|| parse_err(format!("{field}: unknown link `{name}`")))
        };
        let hands = [resolve(&spec.hands.left, "hands.left")?, resolve(&spec.hands.right, "hands.right")?];
        let foot = |f: &FootSpec, field: &str| -> Result<Foot, KinematicsError> {
            Ok(Foot { link: resolve(&f.link, &format!("{field}.link"))?, corners: f.corners.map(Vector3::from) })
        };
        let feet = [foot(&spec.feet.left, "feet.left")?, foot(&spec.feet.right, "feet.right")?];

        let mut excluded_pairs = BTreeSet::new();
        for (k, [a, b]) in spec.collision_exclusions.iter().enumerate() {
            let field = format!("collision_exclusions[{k}]");
            let (ia, ib) = (resolve(a, &field)?, resolve(b, &field)?);
            excluded_pairs.insert(if ia < ib { (ia, ib) } else { (ib, ia) });
        }

        let total_mass: f64 = links.iter().map(|l| l.mass).sum();
        if total_mass <= 0.0 {
            return Err(parse_err("links: total mass must be positive".into()));
        }

        let mut home = vec![0.0; joint_links.len()];
        for (name, &v) in &spec.home {
            let j = index
                .get(name)
                .and_then(|&i| links[i].joint_index)
                .ok_or_else(|| parse_err(format!("home.{name}: not a revolute joint")))?;
            home[j] = v;
        }
        for (j, &li) in joint_links.iter().enumerate() {
            if let Joint::Revolute { lower, upper, .. } = links[li].joint {
                if home[j] < lower - 1e-9 || home[j] > upper + 1e-9 {
                    return Err(parse_err(format!(
                        "home.{}: {} outside limits [{lower}, {upper}]",
                        links[li].name, home[j]
                    )));
                }
            }
        }

        Ok(Self { name: spec.name.clone(), links, index, joint_links, hands, feet, excluded_pairs, home, total_mass })
    }
}

// ---- file schema ----

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotModelSpec {
    pub name: String,
    pub links: Vec<LinkSpec>,
    pub hands: HandsSpec,
    pub feet: FeetSpec,
    #[serde(default)]
    pub collision_exclusions: Vec<[String; 2]>,
    #[serde(default)]
    pub home: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub name: String,
    #[serde(default)]
    pub parent: Option<String>,
    pub joint: JointSpec,
    #[serde(default)]
    pub origin: TransformSpec,
    pub mass: f64,
    #[serde(default)]
    pub com: [f64; 3],
    #[serde(default)]
    pub collision: Vec<PrimitiveSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum JointSpec {
    Fixed,
    Revolute { axis: [f64; 3], limits: [f64; 2] },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandsSpec {
    pub left: String,
    pub right: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeetSpec {
    pub left: FootSpec,
    pub right: FootSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FootSpec {
    pub link: String,
    pub corners: [[f64; 3]; 4],
}

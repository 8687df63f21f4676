use super::meta::Footer;
use super::ColumnId;
use crate::geometry::Rect;

/// Page slots of one row group that may hold records intersecting the query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowGroupSelection {
    pub row_group: usize,
    pub slots: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PrunePlan {
    pub row_groups: Vec<RowGroupSelection>,
    pub slots_total: usize,
}

impl PrunePlan {
    pub fn slots_selected(&self) -> usize {
        self.row_groups.iter().map(|r| r.slots.len()).sum()
    }
}

/// Selects page slots from footer statistics alone. A slot is kept when both
/// its X and Y ranges overlap the query or when either holds NaN. Row groups
/// are tested the same way first.
pub fn prune_pages(footer: &Footer, query: &Rect) -> PrunePlan {
    let mut plan = PrunePlan { row_groups: Vec::new(), slots_total: footer.page_slot_count() };
    for (i, rg) in footer.row_groups.iter().enumerate() {
        let (Some(x), Some(y)) = (rg.chunk(ColumnId::X), rg.chunk(ColumnId::Y)) else { continue };
        if !(x.stats.may_overlap(query.xmin, query.xmax) && y.stats.may_overlap(query.ymin, query.ymax)) {
            continue;
        }
        let slots: Vec<usize> = x
            .pages
            .iter()
            .zip(&y.pages)
            .enumerate()
            .filter(|(_, (px, py))| {
                px.stats.may_overlap(query.xmin, query.xmax) && py.stats.may_overlap(query.ymin, query.ymax)
            })
            .map(|(s, _)| s)
            .collect();
        if !slots.is_empty() {
            plan.row_groups.push(RowGroupSelection { row_group: i, slots });
        }
    }
    plan
}

/** Gating helpers.
 *
 * The client never invents permissions: the map is fetched with the session
 * summary and mirrored verbatim. These helpers only read it.
 */

import type { GatingMap, UserAction } from "./types.js";
import { USER_ACTIONS } from "./types.js";

/** Validate a server-provided gating map covers all thirteen actions. */
export function assertCompleteGatingMap(map: Record<string, boolean>): GatingMap {
  for (const action of USER_ACTIONS) {
    if (typeof map[action] !== "boolean") {
      throw new Error(`gating map from server is missing ${action}`);
    }
  }
  return map as GatingMap;
}

export function allows(map: GatingMap, action: UserAction | null): boolean {
  if (action === null) {
    return true; // level-independent affordance (steps trace, save, evaluate)
  }
  return map[action];
}

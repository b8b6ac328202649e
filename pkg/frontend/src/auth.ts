/** Token claim inspection for UI gating.
 *
 * Decoding here is display-only: it decides which controls appear, never
 * whether an action succeeds -- the backend enforces every permission.
 */

export interface DisplayClaims {
  userId: string;
  username: string;
  roles: string[];
}

export function decodeClaims(accessToken: string): DisplayClaims {
  const parts = accessToken.split(".");
  if (parts.length !== 3) throw new Error("not a token");
  const payloadPart = parts[1] ?? "";
  const padded = payloadPart.replace(/-/g, "+").replace(/_/g, "/");
  const payload = JSON.parse(decodeBase64(padded));
  return {
    userId: String(payload.sub),
    username: String(payload.preferred_username ?? payload.sub),
    roles: Array.isArray(payload.roles) ? payload.roles.map(String) : [],
  };
}

function decodeBase64(value: string): string {
  const padded = value + "=".repeat((4 - (value.length % 4)) % 4);
  const bytes = Uint8Array.from(atob(padded), (c) => c.charCodeAt(0));
  return new TextDecoder().decode(bytes);
}

/** Reservation controls appear for PIs and admins only. */
export function canCreateReservations(roles: string[]): boolean {
  return roles.includes("pi") || roles.includes("admin");
}

/** Mutating admin views are gated the same way the backend gates them. */
export function canManageResources(roles: string[]): boolean {
  return roles.includes("admin") || roles.includes("org_manager");
}

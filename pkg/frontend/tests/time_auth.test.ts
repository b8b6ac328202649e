import { describe, expect, it } from "vitest";

import { canCreateReservations, canManageResources, decodeClaims } from "../src/auth.js";
import { formatUtc, isoToMs, msToIso, snapToQuarterHour } from "../src/time.js";

describe("time helpers", () => {
  it("round-trips ISO timestamps at millisecond precision", () => {
    const iso = "2026-03-01T12:34:56.789+00:00";
    expect(msToIso(isoToMs(iso))).toBe(iso);
  });

  it("snaps to the 15-minute calendar grid", () => {
    const base = isoToMs("2026-03-01T12:00:00.000+00:00");
    expect(snapToQuarterHour(base + 7 * 60_000)).toBe(base);
    expect(snapToQuarterHour(base + 8 * 60_000)).toBe(base + 15 * 60_000);
    expect(snapToQuarterHour(base + 22 * 60_000)).toBe(base + 15 * 60_000);
  });

  it("formats UTC wall time", () => {
    expect(formatUtc(isoToMs("2026-03-02T09:05:00.000+00:00"))).toBe("Mon 09:05");
  });
});

function makeToken(payload: object): string {
  const b64 = (obj: object) =>
    Buffer.from(JSON.stringify(obj)).toString("base64url");
  return `${b64({ alg: "HS256", typ: "JWT" })}.${b64(payload)}.c2ln`;
}

describe("token claims for UI gating", () => {
  it("decodes subject, username, and roles", () => {
    const claims = decodeClaims(
      makeToken({ sub: "u-1", preferred_username: "alice", roles: ["pi"] }),
    );
    expect(claims).toEqual({ userId: "u-1", username: "alice", roles: ["pi"] });
  });

  it("shows reservation controls only to PIs and admins", () => {
    expect(canCreateReservations(["pi"])).toBe(true);
    expect(canCreateReservations(["admin"])).toBe(true);
    expect(canCreateReservations(["regular"])).toBe(false);
    expect(canCreateReservations([])).toBe(false);
  });

  it("gates management views to admins and org managers", () => {
    expect(canManageResources(["org_manager"])).toBe(true);
    expect(canManageResources(["regular", "pi"])).toBe(false);
  });
});

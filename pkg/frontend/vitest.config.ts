import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    include: ["test/**/*.test.ts"],
    globalSetup: ["./test/globalSetup.ts"],
    // Every test talks to a real service process; generation involves
    // sampling and shell extrusion, so leave generous headroom.
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});

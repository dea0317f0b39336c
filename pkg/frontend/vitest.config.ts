import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // the ui-loop suite boots a real solver service and runs jobs through it
    testTimeout: 180_000,
    hookTimeout: 120_000,
  },
});

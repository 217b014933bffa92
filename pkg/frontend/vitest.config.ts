import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // The server-backed suite trains a small checkpoint on first run.
    testTimeout: 60_000,
    hookTimeout: 240_000,
  },
});

import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "happy-dom",
    environmentOptions: {
      // tests hit a locally spawned service on an ephemeral port; in
      // production the UI is served same-origin under /ui
      happyDOM: { settings: { fetch: { disableSameOriginPolicy: true } } },
    },
    include: ["test/**/*.test.ts"],
    testTimeout: 30_000,
    hookTimeout: 60_000,
  },
});

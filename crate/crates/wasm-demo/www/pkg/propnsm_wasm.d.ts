/* tslint:disable */
/* eslint-disable */

/**
 * Gram matrices before and after fitting seen-label property vectors.
 */
export function property_fit(alpha: number, lambda_w: number, n_prime: number, seed: number): string;

/**
 * Instances mapped into a two-dimensional property space.
 */
export function property_plane(alpha: number, lambda_v: number, seed: number): string;

/**
 * Mean binary zero-shot accuracy of each method over random held-out pairs.
 */
export function zero_shot_trials(semantic_noise: number, trials: number, seed: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly property_fit: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly property_plane: (a: number, b: number, c: number) => [number, number, number, number];
    readonly zero_shot_trials: (a: number, b: number, c: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;

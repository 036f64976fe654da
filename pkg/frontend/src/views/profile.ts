/** Profile page: access, rectify, export, and delete with verbatim errors. */

import { MeDocument } from "../api.js";
import { errorBanner, html, raw } from "./html.js";

export function renderProfile(me: MeDocument, banner = ""): string {
  const personal = me.personal ?? {};
  return html`<section class="page profile" data-user="${me.user_id}">
    <h2>Your data</h2>
    ${raw(banner)}
    <form id="profile-form">
      <label>Name <input name="name" value="${personal.name ?? ""}" /></label>
      <label>Email <input name="email" value="${personal.email ?? ""}" /></label>
      <label>Contact <input name="contact" value="${personal.contact ?? ""}" /></label>
      <label>Identification
        <input name="identification" value="${personal.identification ?? ""}" />
      </label>
      <button data-action="save-profile">Save changes</button>
    </form>
    <div class="gdpr-actions">
      <button data-action="export-data">Export my data</button>
      <button data-action="delete-account" class="danger">Delete my account</button>
    </div>
  </section>`;
}

/** Constraint errors from the gateway are shown with their exact code. */
export function renderDeleteConstraint(code: string, message: string): string {
  return errorBanner(code, message);
}

export function renderDeletionReport(removedKeys: string[]): string {
  return html`<div class="banner banner-info">
    Account erased. ${removedKeys.length} on-chain records removed from the
    world state; the transaction log retains history for auditing.
  </div>`;
}
